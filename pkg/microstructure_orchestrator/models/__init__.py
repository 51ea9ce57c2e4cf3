# -*- coding: utf-8 -*-
from . import design_task
from . import microstructure
from . import homogenization
from . import plasticity
from . import design_simulator
from . import pareto
from . import design_pipeline
from . import design_session
from . import saes
from . import baselines
from . import metrics
from . import design_orchestrator
