"""SVG figures and CSV tables."""

from .figures import (
    DEFAULT_PALETTE,
    FigureKind,
    FigureSpec,
    Ordering,
    Scaling,
    default_spec,
    emit_partition_plot,
    emit_ratio_scatter,
    emit_residual_figures,
    emit_sil_scatter,
    emit_stacked_bars,
    emit_trajectory_grid,
)

__all__ = [
    "DEFAULT_PALETTE",
    "FigureKind",
    "FigureSpec",
    "Ordering",
    "Scaling",
    "default_spec",
    "emit_partition_plot",
    "emit_ratio_scatter",
    "emit_residual_figures",
    "emit_sil_scatter",
    "emit_stacked_bars",
    "emit_trajectory_grid",
]
