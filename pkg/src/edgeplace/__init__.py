"""Edge data placement: distance, latency and R-Tree spatial host selection
under load, storage and replication constraints, with a discrete-event
simulator and an exhaustive optimum for tiny instances."""

__version__ = "0.1.0"
