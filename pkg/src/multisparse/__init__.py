"""Clustered sparse Gaussian process regression and learning-augmented quadrotor control."""

from multisparse.kernel import Hyperparameters, cov_matrix, se_kernel, se_kernel_grad
from multisparse.gp import Dataset, Prediction, TrainedGP, OptConfig, gp_fit, gp_nlml, gp_predict
from multisparse.spgp import TrainedSPGP, spgp_fit, spgp_nlml, spgp_predict
from multisparse.cluster import Partition, LocalModelSpec, partition, model_distance, nearest_models
from multisparse.lgp import TrainedLGP, lgp_fit, lgp_predict
from multisparse.msgp import TrainedMSGP, MSGPPrediction, msgp_fit, msgp_predict, msgp_batch_predict

__version__ = "0.1.0"
