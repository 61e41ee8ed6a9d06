"""
Configuration module for the behavior-planning toolkit.

This module provides configuration management through the PlannerConfig class. It loads
settings from an optional YAML file and from environment variables (including a ``.env``
file), fills in defaults, and validates every section with its pydantic model.

The configuration covers:
- Output, checkpoint and logging settings
- Conditional prediction backend and learned-model shape
- Feature normalizers and interaction thresholds
- Behavior generation, IDM parameters and dataset preparation
- Both training stages and the evaluation thresholds

Example:
    config = PlannerConfig.load('config.yaml')
    print(config.predictor.backend)
    print(config.irl.learning_rate)

Environment variables ``PLANNER_OUTPUT_DIR``, ``PLANNER_CHECKPOINT_DIR`` and
``PLANNER_LOG_LEVEL`` override the corresponding YAML keys.
"""

import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import yaml
from dotenv import load_dotenv

from predictive_planner.models import (
    CmpTrainConfig,
    DataConfig,
    EvalThresholds,
    FeatureConfig,
    GenerationConfig,
    IdmParams,
    IrlTrainConfig,
    PredictorConfig
)


logger = logging.getLogger(__name__)

SECTIONS = {
    'predictor': PredictorConfig,
    'features': FeatureConfig,
    'generation': GenerationConfig,
    'idm': IdmParams,
    'irl': IrlTrainConfig,
    'cmp': CmpTrainConfig,
    'evaluation': EvalThresholds,
    'data': DataConfig
}

ENV_OVERRIDES = {
    'PLANNER_OUTPUT_DIR': 'output_dir',
    'PLANNER_CHECKPOINT_DIR': 'checkpoint_dir',
    'PLANNER_LOG_LEVEL': 'log_level'
}


@dataclass
class PlannerConfig:
    """
    Configuration of a planning run.

    Attributes:
        output_dir (str): Directory for files written without an explicit path
        checkpoint_dir (str): Directory for cached feature matrices
        log_level (str): Default logging level name
        predictor (PredictorConfig): Prediction backend settings
        features (FeatureConfig): Feature normalizers
        generation (GenerationConfig): Proposal generation
        idm (IdmParams): Car-following parameters for prediction and synthesis
        irl (IrlTrainConfig): IRL training hyperparameters
        cmp (CmpTrainConfig): Conditional prediction training hyperparameters
        evaluation (EvalThresholds): Planning metric thresholds
        data (DataConfig): Window splitting and filtering
    """

    output_dir: str = './output'
    checkpoint_dir: str = './.checkpoints'
    log_level: str = 'INFO'

    predictor: PredictorConfig = field(default_factory=PredictorConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    idm: IdmParams = field(default_factory=IdmParams)
    irl: IrlTrainConfig = field(default_factory=IrlTrainConfig)
    cmp: CmpTrainConfig = field(default_factory=CmpTrainConfig)
    evaluation: EvalThresholds = field(default_factory=EvalThresholds)
    data: DataConfig = field(default_factory=DataConfig)

    @classmethod
    def load(cls, yaml_path: Optional[str] = None) -> 'PlannerConfig':
        """
        Load configuration from .env and an optional yaml file.

        Args:
            yaml_path: Optional path to yaml config file

        Returns:
            PlannerConfig: Loaded configuration object

        Raises:
            ValueError: If the file holds unknown keys or a section fails validation
        """
        load_dotenv()

        config_dict: Dict[str, Any] = {}
        if yaml_path:
            with open(yaml_path) as f:
                try:
                    yaml_config = yaml.safe_load(f) or {}
                except yaml.YAMLError as e:
                    raise ValueError(f'{yaml_path}: invalid YAML ({e})') from e
            if not isinstance(yaml_config, dict):
                raise ValueError(f'{yaml_path}: expected a mapping at the top level')
            config_dict.update(yaml_config)

        for var, key in ENV_OVERRIDES.items():
            value = os.getenv(var)
            if value:
                config_dict[key] = value

        defaults = {
            'output_dir': './output',
            'checkpoint_dir': './.checkpoints',
            'log_level': 'INFO'
        }
        for key, value in defaults.items():
            if key not in config_dict:
                config_dict[key] = value

        unknown = set(config_dict) - set(defaults) - set(SECTIONS)
        if unknown:
            raise ValueError(f'unknown configuration keys: {", ".join(sorted(unknown))}')

        for name, model in SECTIONS.items():
            config_dict[name] = model.model_validate(config_dict.get(name) or {})

        return cls(**config_dict)

    def with_overrides(self, section: str, **values: Any) -> 'PlannerConfig':
        """Return a copy with validated overrides applied to one section; None values are ignored."""
        values = {k: v for k, v in values.items() if v is not None}
        if not values:
            return self
        current = getattr(self, section)
        updated = SECTIONS[section].model_validate({**current.model_dump(), **values})
        return PlannerConfig(**{**self.__dict__, section: updated})

    def describe(self) -> str:
        lines = [f'output_dir={self.output_dir} checkpoint_dir={self.checkpoint_dir} log_level={self.log_level}']
        for name in SECTIONS:
            lines.append(f'{name}: {getattr(self, name).model_dump()}')
        return '\n'.join(lines)
