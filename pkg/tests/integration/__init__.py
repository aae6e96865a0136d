# End-to-end tests across generation, training, calibration and serving
