from src.constants import *
from src.custom_typing import *
from src.dapoly import AlgebraSpec, TaylorPoly
from src.data_classes import Domain, Manifold, Observation, Site, TruthTag
from src.config import ScenarioConfig, load_config
from src.iod import iod_expand, select_triplet
from src.pipeline import init_from_iod, reconstruct_guess, run_sequence
from src.estimate import OrbitBatch, ls_solve, lsar_solve
