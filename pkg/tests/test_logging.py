import json
import logging

import pytest

from utils.logger_config import get_formatter, get_performance_logger, get_request_logger, setup_logging


@pytest.fixture
def json_log(tmp_path, monkeypatch):
    monkeypatch.setenv("BOT_LOG_DIR", str(tmp_path))
    setup_logging({
        "general": {"app_name": "test_bot", "default_level": "debug"},
        "console": {"enabled": False},
        "file": {"enabled": True, "format": "json", "level": "debug"},
    })
    yield tmp_path / "test_bot.log"
    setup_logging({"file": {"enabled": False}})


def records(path):
    for handler in logging.getLogger().handlers:
        handler.flush()
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


def test_round_context_becomes_json_fields(json_log):
    logger = get_request_logger("orchestrator", round_id=12, user_id="user-0001")
    logger.warning("Proof rejected; no trade")
    (record,) = [r for r in records(json_log) if r["name"] == "orchestrator"]
    assert record["level"] == "WARNING"
    assert record["round_id"] == 12
    assert record["user_id"] == "user-0001"
    assert "request_id" not in record
    assert record["message"] == "Proof rejected; no trade"


def test_performance_timer_reports_duration_and_memory(json_log):
    perf = get_performance_logger("training")
    perf.start_timer("grid")
    duration = perf.stop_timer("grid", message="Backtested 2 configs")
    assert duration >= 0
    (record,) = [r for r in records(json_log) if r["name"] == "training"]
    assert record["duration_ms"] >= 0
    assert "memory_usage" in record
    assert "(operation: grid)" in record["message"]


def test_unstarted_timer(json_log):
    assert get_performance_logger("training").stop_timer("never") is None


def test_exceptions_are_logged_with_traceback(json_log):
    logger = logging.getLogger("chain_sim")
    try:
        raise ValueError("bad band")
    except ValueError:
        logger.error("Round aborted", exc_info=True)
    (record,) = [r for r in records(json_log) if r["name"] == "chain_sim"]
    assert "ValueError: bad band" in record["exc_info"]


def test_env_level_overrides_config(tmp_path, monkeypatch):
    monkeypatch.setenv("BOT_LOG_LEVEL", "warning")
    try:
        app_logger = setup_logging({"file": {"enabled": False}})
        assert app_logger.level == logging.WARNING
        assert logging.getLogger().level == logging.WARNING
    finally:
        monkeypatch.delenv("BOT_LOG_LEVEL")
        setup_logging({"file": {"enabled": False}})


@pytest.mark.parametrize("kind,cls_name", [("json", "JsonFormatter"), ("simple", "Formatter"),
                                           ("standard", "Formatter")])
def test_formatters(kind, cls_name):
    assert type(get_formatter(kind)).__name__ == cls_name
