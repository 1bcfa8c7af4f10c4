"""Rover telemetry autoencoder anomaly detection.

Streams are float arrays of shape (frames, 30): t, sol, then the 28 sensor
columns in csv_header() order.
"""

from ._core import (
    DERIVED_CHANNELS,
    SENSOR_CHANNELS,
    ArtifactError,
    DataError,
    Detector,
    Error,
    IoError,
    OrderingError,
    SchemaError,
    TrainingError,
    UsageError,
    csv_header,
    derive,
    derived_channel_names,
    feature_names,
    featurize,
    generate_nominal,
    make_dataset,
    nearest_rank,
    read_stream,
    run_cli,
    stats7,
    write_stream,
)

__version__ = "0.1.0"
