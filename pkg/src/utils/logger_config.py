"""
Centralized logging configuration for the trading bot simulator
"""

import logging
import os
import sys
import time
import yaml
from pathlib import Path
from logging.handlers import RotatingFileHandler, TimedRotatingFileHandler

from dotenv import load_dotenv
from pythonjsonlogger import jsonlogger

load_dotenv()

# Log levels dictionary for configuration
LOG_LEVELS = {
    "debug": logging.DEBUG,
    "info": logging.INFO,
    "warning": logging.WARNING,
    "error": logging.ERROR,
    "critical": logging.CRITICAL
}

# Default log format
DEFAULT_LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - [%(filename)s:%(lineno)d] - %(message)s'
# Fields picked up by the JSON formatter; extras (round_id, duration_ms, ...) are appended automatically
JSON_LOG_FORMAT = '%(asctime)s %(name)s %(levelname)s %(filename)s %(lineno)d %(message)s'
# Simple format
SIMPLE_LOG_FORMAT = '%(levelname)s - %(message)s'

PROJECT_ROOT = Path(__file__).parent.parent.parent

DEFAULT_CONFIG = {
    "general": {
        "app_name": "trading_bot",
        "default_level": "info"
    },
    "console": {
        "enabled": True,
        "level": "info",
        "format": "standard"
    },
    "file": {
        "enabled": True,
        "level": "debug",
        "format": "json",
        "directory": "logs",
        "rotation": {
            "enabled": True,
            "max_size_mb": 10,
            "backup_count": 5
        }
    },
    "metrics": {
        "enabled": True,
        "include_memory": True
    },
    "loggers": {
        "training": {"level": "info"},
        "orchestrator": {"level": "info"},
        "chain_sim": {"level": "info"},
        "uvicorn": {"level": "warning"}
    }
}


def get_config():
    """
    Load logging configuration from YAML file

    Returns:
        dict: Configuration dictionary
    """
    config_path = PROJECT_ROOT / "config" / "logging_config.yaml"

    if config_path.exists():
        try:
            with open(config_path, 'r') as f:
                return yaml.safe_load(f)
        except Exception as e:
            print(f"Error loading logging config: {e}. Using default configuration.", file=sys.stderr)
    return _copy(DEFAULT_CONFIG)


def _copy(d):
    return {k: _copy(v) if isinstance(v, dict) else v for k, v in d.items()}


def merge_dicts(d1, d2):
    """Deep merge d2 into d1 in place"""
    for k, v in d2.items():
        if k in d1 and isinstance(d1[k], dict) and isinstance(v, dict):
            merge_dicts(d1[k], v)
        else:
            d1[k] = v
    return d1


def get_formatter(format_type):
    """
    Get formatter based on format type

    Args:
        format_type (str): Format type (standard, json, simple)

    Returns:
        logging.Formatter: Formatter instance
    """
    if format_type == "json":
        return jsonlogger.JsonFormatter(JSON_LOG_FORMAT, rename_fields={"asctime": "timestamp", "levelname": "level"})
    elif format_type == "simple":
        return logging.Formatter(SIMPLE_LOG_FORMAT)
    else:  # standard
        return logging.Formatter(DEFAULT_LOG_FORMAT)


def setup_logging(config_override=None):
    """
    Set up logging configuration for the application

    Args:
        config_override (dict): Override default configuration

    Returns:
        logging.Logger: Configured logger instance
    """
    config = merge_dicts(_copy(DEFAULT_CONFIG), get_config() or {})
    if config_override:
        merge_dicts(config, config_override)

    env_level = os.environ.get("BOT_LOG_LEVEL")
    if env_level:
        config["general"]["default_level"] = env_level
        config["console"]["level"] = env_level

    app_name = config["general"]["app_name"]
    default_level = LOG_LEVELS.get(config["general"]["default_level"].lower(), logging.INFO)

    root_logger = logging.getLogger()
    root_logger.setLevel(default_level)

    # Clear existing handlers
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)
        handler.close()

    if config["console"]["enabled"]:
        console_level = LOG_LEVELS.get(config["console"]["level"].lower(), default_level)
        # stderr keeps stdout free for command output
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(console_level)
        console_handler.setFormatter(get_formatter(config["console"]["format"]))
        root_logger.addHandler(console_handler)

    if config["file"]["enabled"]:
        file_level = LOG_LEVELS.get(config["file"]["level"].lower(), default_level)

        log_dir = Path(os.environ.get("BOT_LOG_DIR") or PROJECT_ROOT / config["file"]["directory"])
        os.makedirs(log_dir, exist_ok=True)
        log_file = os.path.join(log_dir, f"{app_name}.log")

        rotation_config = config["file"].get("rotation", {})
        if rotation_config.get("enabled"):
            if "max_size_mb" in rotation_config:
                file_handler = RotatingFileHandler(
                    log_file,
                    maxBytes=rotation_config["max_size_mb"] * 1024 * 1024,
                    backupCount=rotation_config.get("backup_count", 5)
                )
            elif "when" in rotation_config:
                file_handler = TimedRotatingFileHandler(
                    log_file,
                    when=rotation_config["when"],
                    interval=rotation_config.get("interval", 1),
                    backupCount=rotation_config.get("backup_count", 5)
                )
            else:
                file_handler = logging.FileHandler(log_file)
        else:
            file_handler = logging.FileHandler(log_file)

        file_handler.setLevel(file_level)
        file_handler.setFormatter(get_formatter(config["file"]["format"]))
        root_logger.addHandler(file_handler)

    for logger_name, logger_config in config.get("loggers", {}).items():
        if "level" in logger_config:
            logging.getLogger(logger_name).setLevel(
                LOG_LEVELS.get(logger_config["level"].lower(), default_level))

    logger = logging.getLogger(app_name)
    logger.setLevel(default_level)
    return logger


def get_logger(name):
    """
    Get a logger with the given name

    Args:
        name (str): Name for the logger

    Returns:
        logging.Logger: Logger instance
    """
    return logging.getLogger(name)


class LoggerAdapter(logging.LoggerAdapter):
    """
    Logger adapter that stamps round/user context on every record
    """
    def process(self, msg, kwargs):
        extra = kwargs.setdefault("extra", {})
        for key in ("round_id", "user_id", "request_id"):
            value = getattr(self, key, None)
            if value is not None:
                extra.setdefault(key, value)
        return msg, kwargs


def get_request_logger(name, round_id=None, user_id=None, request_id=None):
    """
    Get a logger with round context information

    Args:
        name (str): Name for the logger
        round_id (int): Trade round being executed
        user_id (str): Subscriber the records concern
        request_id (str): HTTP request the records belong to

    Returns:
        LoggerAdapter: Logger adapter with context
    """
    adapter = LoggerAdapter(logging.getLogger(name), {})
    adapter.round_id = round_id
    adapter.user_id = user_id
    adapter.request_id = request_id
    return adapter


class PerformanceLoggerAdapter(LoggerAdapter):
    """
    Logger adapter that includes performance metrics
    """
    def __init__(self, logger, extra=None):
        super().__init__(logger, extra or {})
        self.start_times = {}

    def start_timer(self, operation_name):
        """Start timing an operation"""
        self.start_times[operation_name] = time.perf_counter()

    def stop_timer(self, operation_name, log_level="info", message=None):
        """Stop timing and log the duration; returns the duration in ms"""
        if operation_name not in self.start_times:
            self.logger.warning(f"Timer for operation '{operation_name}' was never started")
            return None

        duration_ms = (time.perf_counter() - self.start_times.pop(operation_name)) * 1000
        if message is None:
            message = f"Operation '{operation_name}' completed"
        else:
            message = f"{message} (operation: {operation_name})"

        extra = {"duration_ms": round(duration_ms, 3)}
        if get_config().get("metrics", {}).get("include_memory"):
            try:
                import psutil
                extra["memory_usage"] = round(psutil.Process(os.getpid()).memory_info().rss / (1024 * 1024), 2)
            except ImportError:
                pass

        getattr(self.logger, log_level.lower())(f"{message} - Duration: {duration_ms:.2f}ms", extra=extra)
        return duration_ms


def get_performance_logger(name):
    """
    Get a logger with performance monitoring capabilities

    Args:
        name (str): Name for the logger

    Returns:
        PerformanceLoggerAdapter: Logger adapter with performance monitoring
    """
    return PerformanceLoggerAdapter(logging.getLogger(name))
