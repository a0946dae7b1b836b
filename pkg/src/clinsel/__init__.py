"""Interpretable outcome prediction: multiple imputation x stratified CV,
five classifiers scored by AUC, gated forward selection and tree thresholds."""

__version__ = "0.1.0"
