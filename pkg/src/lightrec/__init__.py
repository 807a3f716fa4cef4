"""Linear graph collaborative filtering with diffusion and evaluation tools."""

from .data import (DatasetError, DatasetStats, InteractionDataset,
                   compute_stats, holdout_split, load_interactions,
                   save_interactions)
from .diffusion import DiffusionConfig, appnp, appnp_transpose, grid_search_alpha
from .graph import (DEFAULT_SCHEME, InteractionGraph, NormScheme,
                    NormalizedAdjacency, SCHEMES, build_graph, dump_operator,
                    normalize, scheme_by_name, spmv)
from .metrics import (FairnessBin, FairnessTable, MetricsReport, evaluate,
                      fairness_bins, ild, ndcg_at_k, recall_precision_at_k,
                      top_k)
from .model import (EmbeddingState, LayerWeights, init_embeddings,
                    load_embeddings, propagate, save_embeddings, score,
                    score_all)
from .train import (AdamState, NumericError, TrainConfig, adam_step, backward,
                    bpr_loss, sample_batch, train)

__version__ = "0.1.0"
