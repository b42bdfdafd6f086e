"""Differentiable classifiers supplying the training loss and its gradients."""

from .zoo import (
    LabeledBatch,
    ModelSpec,
    grad_input,
    grad_theta,
    init_params,
    input_gradients,
    loss,
    predict,
    predict_batch,
)
