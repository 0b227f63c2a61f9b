"""Statistical kernel: special functions, classical tests, survival,
change-point, outlier, clustering, projection, and anomaly routines."""

from .anomaly import isolation_forest
from .changepoint import ChangePointResult, cusum_change_point
from .cluster import (
    StabilityResult,
    adjusted_rand_index,
    assign_to_centroids,
    cluster_feature_importance,
    cluster_stability,
    kmeans,
)
from .outliers import (
    iqr_fences,
    iqr_outliers,
    mahalanobis_outliers,
    outlier_mask,
    zscore_outliers,
)
from .projection import jacobi_eigh, pca
from .survival import kaplan_meier, log_rank
from .tests import (
    chi_square_independence,
    ks_test,
    levene_test,
    mann_whitney_u,
    one_way_anova,
    pearson_test,
    regression_slope_test,
    shapiro_wilk,
    t_test,
)
from .types import ClusterModel, Projection, SurvivalCurve, TestResult

__all__ = [
    "ChangePointResult",
    "ClusterModel",
    "Projection",
    "StabilityResult",
    "SurvivalCurve",
    "TestResult",
    "adjusted_rand_index",
    "assign_to_centroids",
    "chi_square_independence",
    "cluster_feature_importance",
    "cluster_stability",
    "cusum_change_point",
    "iqr_fences",
    "iqr_outliers",
    "isolation_forest",
    "jacobi_eigh",
    "kaplan_meier",
    "kmeans",
    "ks_test",
    "levene_test",
    "log_rank",
    "mahalanobis_outliers",
    "mann_whitney_u",
    "one_way_anova",
    "outlier_mask",
    "pca",
    "pearson_test",
    "regression_slope_test",
    "shapiro_wilk",
    "t_test",
    "zscore_outliers",
]
