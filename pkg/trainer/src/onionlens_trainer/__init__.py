"""Training-side tooling: dataset synthesis, augmentation, model
training, and export to the files the scanner consumes."""

__version__ = "0.1.0"
