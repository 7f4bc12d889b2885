"""Message-forwarding graph toolkit.

Builds a channel/message property graph from message exports, weak-labels
messages against a claim knowledge base by embedding similarity, trains a
heterogeneous GraphSAGE classifier against a text-only baseline, evaluates
with MCC/calibration metrics, and runs centrality analyses.
"""

__version__ = "0.1.0"
