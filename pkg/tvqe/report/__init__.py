from tvqe.report.figures import plot_fluctuation, plot_rd_curves
from tvqe.report.summary import render_eval_report, write_eval_report

__all__ = ["plot_fluctuation", "plot_rd_curves", "render_eval_report", "write_eval_report"]
