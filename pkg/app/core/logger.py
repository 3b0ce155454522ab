from logging import INFO, WARNING, Formatter, Handler, Logger, StreamHandler, getLevelName, getLogger
from logging.handlers import TimedRotatingFileHandler

from pythonjsonlogger.json import JsonFormatter

from app.core.config import settings

# Log format
LOG_FORMAT: str = "%(asctime)s | %(levelname)-8s | %(process)d | %(name)s:%(lineno)d | %(message)s"
JSON_FORMAT: str = "%(asctime)s %(levelname)s %(process)d %(name)s %(lineno)d %(message)s"
DATE_FORMAT: str = '%Y-%m-%d %H:%M:%S'


def _formatter() -> Formatter:
    if settings.LOG_JSON:
        return JsonFormatter(JSON_FORMAT, DATE_FORMAT)
    return Formatter(LOG_FORMAT, DATE_FORMAT)


def setup_logger(
        name: str,
        log_file: str = None,
        level: int | str = INFO,
        backup_count: int = 30
) -> Logger:
    """
    Setup logger with a rotating file handler and a stderr handler for warnings

    Args:
        name: Logger name
        log_file: Log file name (without path)
        level: Logging level
        backup_count: Number of backup log files to keep

    Returns:
        Configured Logger instance
    """
    _logger = getLogger(name)
    _logger.setLevel(level)

    # Drop handlers from a previous setup (duplicate lines otherwise)
    if _logger.handlers:
        _logger.handlers.clear()

    formatter = _formatter()
    handlers: list[Handler] = []

    if log_file and settings.LOG_TO_FILE:
        settings.LOG_DIR.mkdir(parents=True, exist_ok=True)
        file_handler = TimedRotatingFileHandler(
            filename=settings.LOG_DIR / log_file,
            when='midnight',
            interval=1,
            backupCount=backup_count,
            encoding='UTF-8',
            utc=False
        )
        file_handler.suffix = '%Y-%m-%d'  # precip.log.2025-10-31
        handlers.append(file_handler)

    # stdout carries CLI results, so console output goes to stderr
    console_handler = StreamHandler()
    console_handler.setLevel(WARNING)
    handlers.append(console_handler)

    for handler in handlers:
        handler.setFormatter(formatter)
        _logger.addHandler(handler)

    _logger.propagate = False

    return _logger


_level = getLevelName(settings.LOG_LEVEL.upper())

# One logger per component
logger: Logger = setup_logger(name='app', log_file='app.log', level=_level)
dist_logger: Logger = setup_logger(name='distcore', log_file='distcore.log', level=_level)
fit_logger: Logger = setup_logger(name='gnbfit', log_file='gnbfit.log', level=_level)
extremes_logger: Logger = setup_logger(name='extremes', log_file='extremes.log', level=_level)
trend_logger: Logger = setup_logger(name='trend', log_file='trend.log', level=_level)
abtest_logger: Logger = setup_logger(name='abtest', log_file='abtest.log', level=_level)
pipeline_logger: Logger = setup_logger(name='pipeline', log_file='pipeline.log', level=_level)
api_logger: Logger = setup_logger(name='api', log_file='api.log', level=_level)
