"""Grid-based hurricane track forecasting: best-track ingestion, great-
circle feature derivation, a 1x1-degree grid model, a from-scratch
stacked LSTM trained with BPTT + SGD, autoregressive 6-hour rollout, and
evaluation against a persistence baseline."""

from .geo import GeoPoint, haversine_distance, initial_bearing
from .grid import GridSpec, GridCell, build_grid, encode_cell, decode_cell
from .tracks import StormTrack, TrackPoint, parse_hurdat2, parse_track_csv, filter_valid
from .features import FeatureTuple, derive_features, normalize, pearson_r
from .lstm import LstmNetwork, init_network, forward, backward, mse_loss, sgd_step

__version__ = "0.1.0"

__all__ = [
    "GeoPoint",
    "GridSpec",
    "GridCell",
    "StormTrack",
    "TrackPoint",
    "FeatureTuple",
    "LstmNetwork",
    "haversine_distance",
    "initial_bearing",
    "build_grid",
    "encode_cell",
    "decode_cell",
    "parse_hurdat2",
    "parse_track_csv",
    "filter_valid",
    "derive_features",
    "normalize",
    "pearson_r",
    "init_network",
    "forward",
    "backward",
    "mse_loss",
    "sgd_step",
]
