from .config import PlannerConfig
from .logging_config import setup_logging
