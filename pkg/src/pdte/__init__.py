"""Non-interactive private decision tree evaluation over leveled homomorphic encryption.

Two instantiations share one tree model and one HE contract:

* :mod:`pdte.binary` encrypts inputs bit by bit and computes modulo 2,
* :mod:`pdte.arith` encrypts integer encodings and computes modulo a large prime.

:mod:`pdte.forest` adds private random-forest voting, :mod:`pdte.protocol`
the one-round message exchange and :mod:`pdte.cost` operation accounting.
"""
from .arith import (
    AmbiguityError,
    EncryptedInputInt,
    Encoding01,
    arithmetic_pdte,
    client_decode_int,
    decrypt_int_results,
    distinctify,
    edge_marks,
    encode01,
    encrypt_input_int,
    finalize_int,
    lin_compare,
    lin_compare_dt,
    lin_compare_dt_packed,
    path_marks,
    pdte_int_run,
)
from .binary import (
    BinaryEvaluation,
    EncryptedInputBin,
    compute_dag,
    decode_bin,
    encrypt_input_bin,
    pack_thresholds,
    pdte_bin_run,
)
from .circuits import bitlen, eval_mul, from_bits, she_cmp, she_equal, she_fadder, she_geq, to_bits
from .cost import DATASETS, CostReport, DatasetSpec, bench, cost_predict
from .forest import (
    ForestModel,
    argmax_plain,
    decode_forest,
    forest_argmax,
    forest_majority,
    load_forest,
    majority_plain,
    random_forest,
    save_forest,
)
from .he import (
    BINARY,
    INTEGER,
    CapacityError,
    ContextMismatch,
    CtHandle,
    Evaluator,
    HEError,
    HeParams,
    capacity_check,
    decrypt,
    deserialize,
    encrypt,
    encrypt_packed,
    keygen,
    serialize,
)
from .protocol import (
    Client,
    ClassifyRequest,
    ClassifyResponse,
    FileChannel,
    LoopbackChannel,
    ProtocolError,
    RandomizerSession,
    Server,
    SessionError,
    client_round_trip,
    randomizer_provision,
    serve_classify,
)
from .tree import (
    ModelError,
    Node,
    TreeModel,
    build_tree,
    check_input,
    classify_plain,
    complete_tree,
    load_model,
    random_tree,
    save_model,
)

__version__ = "0.1.0"
