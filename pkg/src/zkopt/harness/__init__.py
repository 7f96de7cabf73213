from .bench import (Execution, HostBuildFailed, MetricsRow, bench, build, execute, execute_program, native_time,
                    run_benchmark)
from .oracle import OracleVerdict, compare, diff_oracle, fault_fixture, inject_output_fault
from .report import emit_report, impact_rows, read_metrics_csv, write_report
from .stats import (DegenerateSeries, ImpactCategory, ImpactRow, MismatchedRows, Thresholds, ZeroBaseline,
                    categorize, correlate, count_outcomes, impact)

__all__ = ["Execution", "HostBuildFailed", "MetricsRow", "bench", "build", "execute", "execute_program",
           "native_time", "run_benchmark", "OracleVerdict", "compare", "diff_oracle", "fault_fixture",
           "inject_output_fault", "emit_report", "impact_rows", "read_metrics_csv", "write_report",
           "DegenerateSeries", "ImpactCategory", "ImpactRow", "MismatchedRows", "Thresholds", "ZeroBaseline",
           "categorize", "correlate", "count_outcomes", "impact"]
