"""
FastAPI router for training, proof verification and epoch simulation endpoints
"""

import os
import time
import uuid
from typing import Optional

from fastapi import APIRouter, File, Form, Request, UploadFile
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ValidationError

from config.bot_config import (
    CIRCUIT_ID,
    DEFAULT_DEPOSIT_CENTS,
    DEFAULT_FEES_BPS,
    DEFAULT_PERIOD_SECONDS,
    DEFAULT_SEED,
    DEFAULT_STRIDE_SECONDS,
    DEFAULT_TOP_K,
    validate_upload,
)
from services.chain_sim import GasSchedule
from services.market_data import load_candles, resample, select_periods, split_periods
from services.orchestrator import EpochConfig, run_epoch
from services.strategy import parse_config
from services.training import RankingMethod, train
from services.zkproof import audit_verifier, circuit_source, setup, verify
from utils.errors import TradingBotError
from utils.file_utils import create_file_data_dict, save_uploaded_file
from utils.logger_config import get_logger

# Get logger for this module
logger = get_logger("bot_router")

router = APIRouter(tags=["Trading Bot"])

# Temporary upload storage path
TEMP_UPLOAD_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.dirname(__file__))), "data/temp")

# Keys of this server's single circuit deployment
DEPLOYMENT_KEYS = setup(os.environ.get("BOT_SETUP_SEED", "deployment").encode("utf-8"))


class VerifyRequest(BaseModel):
    proof: str  # hex-encoded serialized proof


def _request_id(request: Optional[Request]) -> str:
    return getattr(request.state, "request_id", str(uuid.uuid4())) if request else str(uuid.uuid4())


def _error(e: Exception, request_id: str, start_time: float) -> JSONResponse:
    client_error = isinstance(e, (TradingBotError, ValidationError, ValueError))
    if client_error:
        logger.warning(f"Rejected request: {e}", extra={"request_id": request_id})
    else:
        logger.error(f"Error processing request: {str(e)}", extra={"request_id": request_id}, exc_info=True)
    return JSONResponse(
        content={
            "success": False,
            "error": str(e),
            "request_id": request_id,
            "processing_time": round(time.time() - start_time, 2),
        },
        status_code=400 if client_error else 500,
    )


def _save_candles(file: UploadFile, request_id: str) -> str:
    ok, message = validate_upload(file.filename, file.size or 0)
    if not ok:
        raise ValueError(message)
    return save_uploaded_file(file, TEMP_UPLOAD_DIR, request_id=request_id)


@router.get("/health")
async def health_check(request: Request = None):
    """Health check endpoint for the bot router"""
    request_id = _request_id(request)
    return {"status": "healthy", "service": "trading-bot", "circuit": CIRCUIT_ID, "request_id": request_id}


@router.get("/circuit")
async def circuit_info(request: Request = None):
    """Published root program and the digest of the deployed verification key"""
    request_id = _request_id(request)
    return {
        "circuit_id": CIRCUIT_ID,
        "source": circuit_source(),
        "verification_key_digest": DEPLOYMENT_KEYS.vk_digest(),
        "verifier_matches_source": audit_verifier(DEPLOYMENT_KEYS.verification_key),
        "request_id": request_id,
    }


@router.post("/train")
async def train_endpoint(
    file: UploadFile = File(...),
    input_period: int = Form(DEFAULT_PERIOD_SECONDS),
    period: Optional[int] = Form(None),
    method: str = Form("avg"),
    top: int = Form(DEFAULT_TOP_K),
    fees_bps: int = Form(DEFAULT_FEES_BPS),
    stride: int = Form(DEFAULT_STRIDE_SECONDS),
    request: Request = None,
):
    """Grid-search the uploaded candles and return the ranking of the training windows"""
    request_id = _request_id(request)
    start_time = time.time()
    logger.info(f"Training requested for file: {file.filename}", extra={"request_id": request_id})
    file_path = None
    try:
        file_path = _save_candles(file, request_id)
        series = load_candles(file_path, period_seconds=input_period)
        if period and period != series.period_seconds:
            series = resample(series, period)
        train_windows, test_windows = split_periods(select_periods(series, stride))
        report = train(series, train_windows, RankingMethod(method), top, fees_bps=fees_bps)
        return JSONResponse(content={
            "success": True,
            "ranking": report.model_dump(mode="json"),
            "windows": {"train": len(train_windows), "test": len(test_windows)},
            "input": create_file_data_dict(file_path, request_id),
            "request_id": request_id,
            "processing_time": round(time.time() - start_time, 2),
        })
    except Exception as e:
        return _error(e, request_id, start_time)
    finally:
        if file_path and os.path.exists(file_path):
            os.remove(file_path)


@router.post("/proofs/verify")
async def verify_proof(body: VerifyRequest, request: Request = None):
    """Verify a hex-encoded proof against this deployment's verification key"""
    request_id = _request_id(request)
    try:
        raw = bytes.fromhex(body.proof)
    except ValueError:
        raw = b""
    valid = verify(DEPLOYMENT_KEYS.verification_key, raw)
    logger.info(f"Proof verification result: {valid}", extra={"request_id": request_id})
    return {"valid": valid, "request_id": request_id}


@router.post("/simulate")
async def simulate_endpoint(
    file: UploadFile = File(...),
    params: str = Form(...),
    input_period: int = Form(DEFAULT_PERIOD_SECONDS),
    period: Optional[int] = Form(None),
    rounds: int = Form(20),
    users: int = Form(10),
    deposit_cents: int = Form(DEFAULT_DEPOSIT_CENTS),
    seed: int = Form(DEFAULT_SEED),
    jitter: bool = Form(True),
    request: Request = None,
):
    """Run one epoch over the uploaded candles and return the epoch report"""
    request_id = _request_id(request)
    start_time = time.time()
    logger.info(f"Simulation requested: params {params}, {rounds} rounds", extra={"request_id": request_id})
    file_path = None
    try:
        file_path = _save_candles(file, request_id)
        series = load_candles(file_path, period_seconds=input_period)
        epoch = EpochConfig(
            config=parse_config(params),
            period_seconds=period or series.period_seconds,
            rounds=rounds,
            users=users,
            deposit_cents=deposit_cents,
            gas=GasSchedule() if jitter else GasSchedule(jitter_pct=0.0),
            seed=seed,
        )
        outcome = run_epoch(series, epoch, keys=DEPLOYMENT_KEYS)
        return JSONResponse(content={
            "success": True,
            "report": outcome.report.model_dump(mode="json", exclude={"settlement": {"rows"}}),
            "trace": [line for t in outcome.traces for line in t.public_lines()],
            "request_id": request_id,
            "processing_time": round(time.time() - start_time, 2),
        })
    except Exception as e:
        return _error(e, request_id, start_time)
    finally:
        if file_path and os.path.exists(file_path):
            os.remove(file_path)
