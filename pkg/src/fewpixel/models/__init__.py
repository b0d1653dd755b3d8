from .remote import ProtocolError, RemoteModel, StubServer, TransportError, remote_score
from .shapes import export_dataset, generate_shapes_dataset, import_dataset, train_test_split
from .tiny import (TinyClassifier, forward, input_gradient, load_weights, loss_and_gradient,
                   save_weights, train)
