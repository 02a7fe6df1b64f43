"""FastAPI application exposing the fill-mask / encode / translate protocol.

Error mapping: malformed request bodies are 400, a mask_index outside the
token list is 422, and a model that failed to load makes every model
endpoint answer 503 while /health reports the failure.
"""

from __future__ import annotations

import logging

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .config import ShimConfig
from .models import ModelBundle, ModelLoadError, build_models

log = logging.getLogger(__name__)


class FillMaskRequest(BaseModel):
    tokens: list[str] = Field(min_length=1)
    mask_index: int = Field(ge=0)
    k: int = Field(ge=1)


class EncodeRequest(BaseModel):
    texts: list[str] = Field(min_length=1)


class TranslateRequest(BaseModel):
    text: str
    src: str = Field(min_length=1)
    tgt: str = Field(min_length=1)


def create_app(config: ShimConfig | None = None, models: ModelBundle | None = None) -> FastAPI:
    """Build the service; pass a prebuilt ModelBundle to skip model loading."""
    config = config or ShimConfig()
    app = FastAPI(title="augtext model sidecar")
    load_error: str | None = None
    if models is None:
        try:
            models = build_models(config)
        except ModelLoadError as e:
            log.error("model loading failed: %s", e)
            load_error = str(e)
    else:
        from .models import validate_encoder

        validate_encoder(models.encoder)

    app.state.models = models
    app.state.load_error = load_error

    @app.exception_handler(RequestValidationError)
    async def malformed_request(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    def require_models() -> ModelBundle:
        if app.state.models is None:
            raise HTTPException(status_code=503, detail=f"model not ready: {app.state.load_error}")
        return app.state.models

    @app.get("/health")
    def health():
        if app.state.models is None:
            return JSONResponse(
                status_code=503,
                content={"status": "loading_failed", "error": app.state.load_error},
            )
        bundle = app.state.models
        return {"status": "ok", **bundle.identity}

    @app.post("/fill_mask")
    def fill_mask(request: FillMaskRequest):
        bundle = require_models()
        if request.mask_index >= len(request.tokens):
            raise HTTPException(
                status_code=422,
                detail=f"mask_index {request.mask_index} out of range "
                       f"for {len(request.tokens)} tokens",
            )
        predictions = bundle.mlm.predict(request.tokens, request.mask_index, request.k)
        return {"predictions": predictions}

    @app.post("/encode")
    def encode(request: EncodeRequest):
        bundle = require_models()
        vectors = bundle.encoder.encode([t.lower() for t in request.texts])
        return {"vectors": [[float(x) for x in row] for row in vectors]}

    @app.post("/translate")
    def translate(request: TranslateRequest):
        bundle = require_models()
        if request.src == request.tgt:
            raise HTTPException(status_code=400, detail="unsupported pair: src == tgt")
        try:
            text = bundle.translator.translate(request.text, request.src, request.tgt)
        except KeyError as e:
            raise HTTPException(status_code=400, detail=f"unsupported pair: {e}") from e
        return {"text": text}

    return app
