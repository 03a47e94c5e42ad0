"""Inference engine: fields, planner, posterior, sampler, predictors, evaluation and figures."""
