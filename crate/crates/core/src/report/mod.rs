//! Error metrics, variant comparison tables and plot data.

mod metrics;
mod plot;
mod table;

pub use metrics::{
    evaluate_run, evaluate_stock, mae, metrics_to_csv, parse_metrics_csv, r2, rmse, score_pairs, Metric,
    MetricsRow, Phase, Scale, METRICS_HEADER,
};
pub use plot::{
    emit_plot_data, forecast_points, svg_series, ForecastPoint, PlotData, PlotSource, CONVERGENCE_HEADER,
    FORECAST_HEADER,
};
pub use table::{comparison_table, Cell, ComparisonTable, COMPARISON_HEADER};
