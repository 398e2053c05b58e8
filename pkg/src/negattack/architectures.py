"""The four-model desk-scale suite for 28x28 grayscale digits.

Each factory returns a :class:`~negattack.network.ModelSpec`. The suite plays
the role of four independently trained networks with distinct decision
boundaries; two dense and two convolutional shapes keep them dissimilar.
"""

from .network import Conv2d, Dense, Flatten, MaxPool2d, ModelSpec, ReLU

INPUT_SHAPE = (1, 28, 28)
N_CLASSES = 10


def mlp_a(input_shape=INPUT_SHAPE, n_classes=N_CLASSES):
    d = input_shape[0] * input_shape[1] * input_shape[2]
    return ModelSpec(
        [Flatten(), Dense(d, 128), ReLU(), Dense(128, 64), ReLU(), Dense(64, n_classes)],
        input_shape, n_classes,
    )


def mlp_b(input_shape=INPUT_SHAPE, n_classes=N_CLASSES):
    d = input_shape[0] * input_shape[1] * input_shape[2]
    return ModelSpec(
        [Flatten(), Dense(d, 256), ReLU(), Dense(256, 96), ReLU(), Dense(96, 48), ReLU(),
         Dense(48, n_classes)],
        input_shape, n_classes,
    )


def cnn_a(input_shape=INPUT_SHAPE, n_classes=N_CLASSES):
    c, h, w = input_shape
    conv = Conv2d(c, 8, 5)
    pooled = MaxPool2d(2).output_shape(conv.output_shape(input_shape))
    return ModelSpec(
        [conv, ReLU(), MaxPool2d(2), Flatten(),
         Dense(pooled[0] * pooled[1] * pooled[2], n_classes)],
        input_shape, n_classes,
    )


def cnn_b(input_shape=INPUT_SHAPE, n_classes=N_CLASSES):
    c, h, w = input_shape
    conv1 = Conv2d(c, 8, 5)
    s = MaxPool2d(2).output_shape(conv1.output_shape(input_shape))
    conv2 = Conv2d(8, 16, 5)
    s = MaxPool2d(2).output_shape(conv2.output_shape(s))
    return ModelSpec(
        [conv1, ReLU(), MaxPool2d(2), conv2, ReLU(), MaxPool2d(2), Flatten(),
         Dense(s[0] * s[1] * s[2], n_classes)],
        input_shape, n_classes,
    )


ARCHITECTURES = {"mlp_a": mlp_a, "mlp_b": mlp_b, "cnn_a": cnn_a, "cnn_b": cnn_b}


def get_architecture(name, input_shape=INPUT_SHAPE, n_classes=N_CLASSES):
    try:
        factory = ARCHITECTURES[name]
    except KeyError:
        raise ValueError(
            f"unknown architecture {name!r}; choose from {', '.join(sorted(ARCHITECTURES))}"
        ) from None
    return factory(tuple(input_shape), n_classes)
