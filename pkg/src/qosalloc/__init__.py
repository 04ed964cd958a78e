"""Resource allocation between co-scheduled HP and BE workloads: simulator,
worst-case QoS predictor, learning controllers, baselines, and harness."""

__version__ = "0.1.0"
