from .metrics import average_precision, grouped_map, mae, mean_average_precision, rank_order, relevance_labels
from .splits import CvSplit, UplSplit, make_cv_split, make_upl_split
from .wilcoxon import WilcoxonResult, wilcoxon_signed_rank

__all__ = [
    "CvSplit",
    "UplSplit",
    "WilcoxonResult",
    "average_precision",
    "grouped_map",
    "mae",
    "make_cv_split",
    "make_upl_split",
    "mean_average_precision",
    "rank_order",
    "relevance_labels",
    "wilcoxon_signed_rank",
]
