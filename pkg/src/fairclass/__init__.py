"""Fair binary classification: resampling, fairness-constrained fitting and cut-off tuning."""
