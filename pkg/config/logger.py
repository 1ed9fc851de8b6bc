# config/logger.py
"""
Logging setup for the Age Agnostic Speaker Verification toolkit
"""

import logging
import logging.handlers
from config.settings import LOGGING_CONFIG

class AASVLogger:
    """Logger factory shared by every module of the toolkit"""

    _loggers = {}

    @staticmethod
    def get_logger(name):
        """Get or create a logger with the given name"""
        if name not in AASVLogger._loggers:
            logger = logging.getLogger(name)
            logger.setLevel(getattr(logging, LOGGING_CONFIG['level'].upper(), logging.INFO))
            logger.propagate = False

            if not logger.handlers:
                # File handler with rotation
                file_handler = logging.handlers.RotatingFileHandler(
                    LOGGING_CONFIG['log_file'],
                    maxBytes=LOGGING_CONFIG['max_bytes'],
                    backupCount=LOGGING_CONFIG['backup_count'],
                    encoding="utf-8",
                )

                # Console handler
                console_handler = logging.StreamHandler()

                formatter = logging.Formatter(LOGGING_CONFIG['format'])
                file_handler.setFormatter(formatter)
                console_handler.setFormatter(formatter)

                logger.addHandler(file_handler)
                logger.addHandler(console_handler)

            AASVLogger._loggers[name] = logger

        return AASVLogger._loggers[name]

    @staticmethod
    def set_level(level: str):
        """Change the level of every logger created so far"""
        for logger in AASVLogger._loggers.values():
            logger.setLevel(getattr(logging, level.upper(), logging.INFO))

# Initialize default logger
logger = AASVLogger.get_logger("aasv")

if __name__ == "__main__":
    test_logger = AASVLogger.get_logger("test")
    test_logger.info("Logger initialized successfully")
    test_logger.warning("This is a warning")
    test_logger.error("This is an error")
