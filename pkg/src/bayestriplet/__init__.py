"""Streaming Bayesian triplet mining for metric learning.

Per-class multivariate Gaussian embedding distributions are refreshed after
every mini-batch through conjugate (normal-inverse-Wishart) updating, triplet
companions are then sampled from those distributions rather than picked from
the batch, and a small fully connected embedding network is trained against a
triplet or NCA objective. Retrieval quality is measured with Recall@k.
"""

__version__ = "0.1.0"
