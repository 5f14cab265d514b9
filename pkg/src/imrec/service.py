"""Model persistence (versioned JSON artifact) and the loopback HTTP service.

Artifacts are deterministic: keys sorted, reals serialized via Python's
shortest round-trip repr, no timestamps. The service holds the model
immutably, never logs or persists request bodies, and never writes to disk.
"""

from __future__ import annotations

import json
import uuid
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from imrec.corpus import CATEGORY_NAMES, NUM_CATEGORIES, atomic_write_text
from imrec.errors import ArtifactError, DataError
from imrec.features import (
    CATEGORICAL_FIELDS,
    FeatureConfig,
    MetadataEncoder,
    TfidfModel,
    compute_schema_id,
)
from imrec.models import (
    ForestConfig,
    ForestModel,
    GnbModel,
    SvmBinaryModel,
    SvmOvrModel,
    TreeLeaf,
    TreeNode,
)
from imrec.pipeline import (
    CategoryScorer,
    DraftValidationError,
    NecessityMember,
    PipelineConfig,
    Recommendation,
    TrainedModel,
    analyze,
    parse_draft,
)

FORMAT_VERSION = 1
DEFAULT_PORT = 8701
DEFAULT_ORIGINS = ("http://127.0.0.1:8702", "http://localhost:8702")


def canonical_json(payload) -> str:
    """The single JSON spelling shared by the CLI and the HTTP service."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def recommendation_payload(rec: Recommendation) -> dict:
    return {
        "needs_image": rec.needs_image,
        "probability": rec.probability,
        "threshold": rec.threshold,
        "categories": [
            {
                "name": CATEGORY_NAMES[int(c.category)],
                "confidence": c.confidence,
                "suggestion": c.suggestion,
            }
            for c in rec.categories
        ],
        "model_version": rec.model_version,
    }


# --- Artifact serialization -----------------------------------------------------


def _tree_to_doc(node) -> dict:
    if isinstance(node, TreeLeaf):
        return {"fraction": node.fraction}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "left": _tree_to_doc(node.left),
        "right": _tree_to_doc(node.right),
    }


def _gnb_to_doc(model: GnbModel) -> dict:
    return {
        "classes": list(model.classes),
        "priors": model.priors.tolist(),
        "means": model.means.tolist(),
        "variances": model.variances.tolist(),
        "var_smoothing": model.var_smoothing,
    }


def _member_params(member: NecessityMember) -> dict:
    model = member.model
    if member.kind == "forest":
        return {
            "n_trees": model.config.n_trees,
            "max_features": model.config.max_features,
            "min_samples_leaf": model.config.min_samples_leaf,
            "bootstrap": model.config.bootstrap,
            "seed": model.seed,
            "trees": [_tree_to_doc(t) for t in model.trees],
        }
    if member.kind == "gnb":
        return _gnb_to_doc(model)
    return {
        "weights": model.weights.tolist(),
        "bias": model.bias,
        "lambda": model.lam,
        "epochs": model.epochs,
        "seed": model.seed,
    }


def model_to_doc(model: TrainedModel) -> dict:
    if model.recommender_kind == "gnb":
        categories = []
        for scorer in model.gnb_bank:
            if scorer.kind == "constant":
                categories.append({"kind": "constant", "probability": scorer.constant})
            else:
                categories.append({"kind": "gnb", "params": _gnb_to_doc(scorer.gnb)})
        recommender = {"kind": "gnb", "categories": categories}
    else:
        svm = model.svm_model
        recommender = {
            "kind": "svm",
            "weights": svm.weights.tolist(),
            "biases": svm.biases.tolist(),
            "lambda": svm.lam,
            "epochs": svm.epochs,
            "seed": svm.seed,
        }
    return {
        "format_version": FORMAT_VERSION,
        "model_version": model.model_version,
        "schema_id": model.schema_id,
        "config": model.config.to_dict(),
        "metadata_encoder": {
            "fields": {
                name: list(vocab) for name, vocab in zip(CATEGORICAL_FIELDS, model.encoder.field_vocabs)
            },
            "keywords": list(model.encoder.keywords),
        },
        "tfidf": {"terms": list(model.tfidf.terms), "idf": model.tfidf.idf.tolist()},
        "stopwords": sorted(model.stopwords),
        "necessity": {
            "decision_threshold": model.decision_threshold,
            "members": [
                {"kind": m.kind, "vote_threshold": m.vote_threshold, "params": _member_params(m)}
                for m in model.members
            ],
        },
        "recommender": recommender,
        "templates": list(model.templates),
        "training_fingerprint": model.training_fingerprint,
    }


def save_model(model: TrainedModel, path: str | Path) -> None:
    """Single-file artifact; atomic write; byte-deterministic for a fixed model."""
    doc = model_to_doc(model)
    text = json.dumps(doc, sort_keys=True, indent=1, ensure_ascii=False) + "\n"
    atomic_write_text(Path(path), text)


# --- Artifact validation and loading ----------------------------------------------


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ArtifactError(message)


def _tree_from_doc(doc, width: int):
    _require(isinstance(doc, dict), "forest tree node must be an object")
    if "fraction" in doc:
        fraction = doc["fraction"]
        _require(
            isinstance(fraction, (int, float)) and 0.0 <= float(fraction) <= 1.0,
            "leaf fraction must lie in [0,1]",
        )
        return TreeLeaf(fraction=float(fraction))
    for key in ("feature", "threshold", "left", "right"):
        _require(key in doc, f"tree node missing '{key}'")
    feature = doc["feature"]
    _require(isinstance(feature, int) and 0 <= feature < width, "tree node feature index out of range")
    threshold = doc["threshold"]
    _require(isinstance(threshold, (int, float)) and np.isfinite(threshold), "tree threshold must be finite")
    return TreeNode(
        feature=feature,
        threshold=float(threshold),
        left=_tree_from_doc(doc["left"], width),
        right=_tree_from_doc(doc["right"], width),
    )


def _gnb_from_doc(doc: dict, width: int, schema_id: str) -> GnbModel:
    for key in ("classes", "priors", "means", "variances", "var_smoothing"):
        _require(key in doc, f"gnb parameters missing '{key}'")
    classes = tuple(int(c) for c in doc["classes"])
    _require(len(classes) >= 2 and sorted(set(classes)) == list(classes), "gnb classes must be sorted and distinct")
    priors = np.asarray(doc["priors"], dtype=np.float64)
    means = np.asarray(doc["means"], dtype=np.float64)
    variances = np.asarray(doc["variances"], dtype=np.float64)
    smoothing = float(doc["var_smoothing"])
    _require(priors.shape == (len(classes),), "gnb priors shape mismatch")
    _require(means.shape == (len(classes), width), "gnb means shape mismatch")
    _require(variances.shape == (len(classes), width), "gnb variances shape mismatch")
    _require(bool(np.all(priors > 0.0)) and abs(float(priors.sum()) - 1.0) < 1e-9, "gnb priors must be positive and sum to 1")
    _require(smoothing > 0.0, "gnb var_smoothing must be positive")
    _require(bool(np.all(variances >= smoothing)), "gnb variances must be >= var_smoothing")
    return GnbModel(
        classes=classes,
        priors=priors,
        means=means,
        variances=variances,
        var_smoothing=smoothing,
        schema_id=schema_id,
    )


def _member_from_doc(doc: dict, width: int, config: PipelineConfig, schema_id: str) -> NecessityMember:
    _require(isinstance(doc, dict), "necessity member must be an object")
    for key in ("kind", "vote_threshold", "params"):
        _require(key in doc, f"necessity member missing '{key}'")
    kind = doc["kind"]
    _require(kind in ("forest", "gnb", "svm"), f"unknown necessity member kind {kind!r}")
    vote = doc["vote_threshold"]
    _require(isinstance(vote, (int, float)) and 0.0 <= float(vote) <= 1.0, "vote_threshold must lie in [0,1]")
    params = doc["params"]
    _require(isinstance(params, dict), "member params must be an object")
    if kind == "forest":
        for key in ("n_trees", "max_features", "min_samples_leaf", "bootstrap", "seed", "trees"):
            _require(key in params, f"forest params missing '{key}'")
        trees = params["trees"]
        _require(isinstance(trees, list) and len(trees) == params["n_trees"] and trees, "forest tree count mismatch")
        forest = ForestModel(
            trees=tuple(_tree_from_doc(t, width) for t in trees),
            config=ForestConfig(
                n_trees=int(params["n_trees"]),
                max_features=None if params["max_features"] is None else int(params["max_features"]),
                min_samples_leaf=int(params["min_samples_leaf"]),
                bootstrap=bool(params["bootstrap"]),
            ),
            seed=int(params["seed"]),
            schema_id=schema_id,
        )
        return NecessityMember(kind=kind, vote_threshold=float(vote), model=forest)
    if kind == "gnb":
        return NecessityMember(kind=kind, vote_threshold=float(vote), model=_gnb_from_doc(params, width, schema_id))
    for key in ("weights", "bias", "lambda", "epochs", "seed"):
        _require(key in params, f"svm params missing '{key}'")
    weights = np.asarray(params["weights"], dtype=np.float64)
    _require(weights.shape == (width,), "svm weights shape mismatch")
    svm = SvmBinaryModel(
        weights=weights,
        bias=float(params["bias"]),
        lam=float(params["lambda"]),
        epochs=int(params["epochs"]),
        seed=int(params["seed"]),
        schema_id=schema_id,
    )
    return NecessityMember(kind=kind, vote_threshold=float(vote), model=svm)


def load_model(path: str | Path) -> TrainedModel:
    """Load and fully validate an artifact; the first violated invariant is named."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"artifact integrity: malformed JSON ({exc.msg})") from None
    _require(isinstance(doc, dict), "artifact must be a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ArtifactError(f"unsupported format_version {version!r} (expected {FORMAT_VERSION})")
    for key in (
        "model_version",
        "schema_id",
        "config",
        "metadata_encoder",
        "tfidf",
        "stopwords",
        "necessity",
        "recommender",
        "templates",
        "training_fingerprint",
    ):
        _require(key in doc, f"artifact missing section '{key}'")

    templates = doc["templates"]
    _require(
        isinstance(templates, list) and len(templates) == NUM_CATEGORIES,
        f"templates must contain exactly {NUM_CATEGORIES} entries, got "
        f"{len(templates) if isinstance(templates, list) else type(templates).__name__}",
    )
    _require(all(isinstance(t, str) and t for t in templates), "templates must be non-empty strings")

    try:
        config = PipelineConfig.from_dict(doc["config"])
    except (KeyError, TypeError, ValueError, DataError) as exc:
        raise ArtifactError(f"invalid config section: {exc}") from None

    enc = doc["metadata_encoder"]
    _require(isinstance(enc, dict) and "fields" in enc and "keywords" in enc, "metadata_encoder needs fields and keywords")
    fields = enc["fields"]
    _require(
        isinstance(fields, dict) and set(fields) == set(CATEGORICAL_FIELDS),
        "metadata_encoder fields must cover exactly the categorical schema",
    )
    for name in CATEGORICAL_FIELDS:
        vocab = fields[name]
        _require(isinstance(vocab, list) and all(isinstance(v, str) for v in vocab), f"vocabulary for '{name}' must be strings")
        _require(len(set(vocab)) == len(vocab), f"vocabulary for '{name}' has duplicates")
    keywords = enc["keywords"]
    _require(isinstance(keywords, list) and all(isinstance(k, str) for k in keywords), "keywords vocabulary must be strings")
    encoder = MetadataEncoder(
        field_vocabs=tuple(tuple(fields[name]) for name in CATEGORICAL_FIELDS),
        keywords=tuple(keywords),
        config=config.feature,
    )

    tf = doc["tfidf"]
    _require(isinstance(tf, dict) and "terms" in tf and "idf" in tf, "tfidf section needs terms and idf")
    terms = tf["terms"]
    idf = tf["idf"]
    _require(isinstance(terms, list) and all(isinstance(t, str) for t in terms), "tfidf terms must be strings")
    _require(len(set(terms)) == len(terms), "tfidf terms have duplicates")
    _require(isinstance(idf, list) and len(idf) == len(terms), "tfidf idf length must match terms")
    _require(all(isinstance(v, (int, float)) and v >= 1.0 for v in idf), "tfidf idf values must be >= 1")
    tfidf = TfidfModel(
        terms=tuple(terms),
        idf=np.asarray(idf, dtype=np.float64),
        min_df=config.feature.min_df,
        max_vocab=config.feature.max_vocab,
    )

    schema_id = doc["schema_id"]
    recomputed = compute_schema_id(encoder, tfidf, config.feature)
    _require(
        schema_id == recomputed,
        f"schema_id {schema_id!r} does not match the stored vocabularies ({recomputed!r})",
    )
    width = encoder.width + tfidf.width

    necessity = doc["necessity"]
    _require(isinstance(necessity, dict) and "decision_threshold" in necessity and "members" in necessity, "necessity section needs decision_threshold and members")
    decision_threshold = necessity["decision_threshold"]
    _require(
        isinstance(decision_threshold, (int, float)) and 0.0 <= float(decision_threshold) <= 1.0,
        "decision_threshold must lie in [0,1]",
    )
    raw_members = necessity["members"]
    _require(isinstance(raw_members, list) and raw_members, "necessity needs at least one member")
    members = tuple(_member_from_doc(m, width, config, schema_id) for m in raw_members)

    rec = doc["recommender"]
    _require(isinstance(rec, dict) and "kind" in rec, "recommender section needs a kind")
    gnb_bank = None
    svm_model = None
    if rec["kind"] == "gnb":
        cats = rec.get("categories")
        _require(isinstance(cats, list) and len(cats) == NUM_CATEGORIES, f"recommender needs {NUM_CATEGORIES} category entries")
        bank = []
        for entry in cats:
            _require(isinstance(entry, dict) and "kind" in entry, "recommender category entry needs a kind")
            if entry["kind"] == "constant":
                p = entry.get("probability")
                _require(isinstance(p, (int, float)) and 0.0 <= float(p) <= 1.0, "constant probability must lie in [0,1]")
                bank.append(CategoryScorer(kind="constant", constant=float(p)))
            else:
                _require(entry["kind"] == "gnb", f"unknown recommender entry kind {entry['kind']!r}")
                bank.append(CategoryScorer(kind="gnb", gnb=_gnb_from_doc(entry.get("params", {}), width, schema_id)))
        gnb_bank = tuple(bank)
    elif rec["kind"] == "svm":
        for key in ("weights", "biases", "lambda", "epochs", "seed"):
            _require(key in rec, f"svm recommender missing '{key}'")
        weights = np.asarray(rec["weights"], dtype=np.float64)
        biases = np.asarray(rec["biases"], dtype=np.float64)
        _require(weights.shape == (NUM_CATEGORIES, width), "svm recommender weights shape mismatch")
        _require(biases.shape == (NUM_CATEGORIES,), "svm recommender biases shape mismatch")
        svm_model = SvmOvrModel(
            weights=weights,
            biases=biases,
            lam=float(rec["lambda"]),
            epochs=int(rec["epochs"]),
            seed=int(rec["seed"]),
            schema_id=schema_id,
        )
    else:
        raise ArtifactError(f"unknown recommender kind {rec['kind']!r}")
    _require(rec["kind"] == config.recommender, "recommender kind disagrees with config")

    stopwords = doc["stopwords"]
    _require(isinstance(stopwords, list) and all(isinstance(w, str) for w in stopwords), "stopwords must be strings")
    model_version = doc["model_version"]
    _require(isinstance(model_version, str) and model_version, "model_version must be a non-empty string")
    fingerprint = doc["training_fingerprint"]
    _require(isinstance(fingerprint, dict), "training_fingerprint must be an object")

    return TrainedModel(
        config=config,
        encoder=encoder,
        tfidf=tfidf,
        stopwords=frozenset(stopwords),
        members=members,
        decision_threshold=float(decision_threshold),
        recommender_kind=rec["kind"],
        gnb_bank=gnb_bank,
        svm_model=svm_model,
        templates=tuple(templates),
        model_version=model_version,
        schema_id=schema_id,
        training_fingerprint=fingerprint,
    )


# --- HTTP service -----------------------------------------------------------------


def model_info_payload(model: TrainedModel) -> dict:
    return {
        "model_version": model.model_version,
        "schema_id": model.schema_id,
        "categories": list(CATEGORY_NAMES),
        "decision_threshold": model.decision_threshold,
        "members": [{"kind": m.kind, "vote_threshold": m.vote_threshold} for m in model.members],
        "recommender": model.recommender_kind,
        "feature_config": model.config.feature.to_dict(),
        "top_k": model.config.top_k,
        "category_cutoff": model.config.category_cutoff,
    }


class ImrecServer(ThreadingHTTPServer):
    daemon_threads = True
    # the socketserver default backlog of 5 drops SYNs under concurrent load,
    # which surfaces as 1s retransmit spikes in client latency
    request_queue_size = 128

    def __init__(self, address, model: TrainedModel, origins=DEFAULT_ORIGINS):
        super().__init__(address, _Handler)
        self.model = model
        self.origins = frozenset(origins)


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "imrec"

    # request lines and bodies are intentionally not logged
    def log_message(self, format, *args):
        pass

    def _cors_headers(self):
        origin = self.headers.get("Origin")
        if origin and origin in self.server.origins:
            self.send_header("Access-Control-Allow-Origin", origin)
            self.send_header("Vary", "Origin")

    def _send_json(self, status: int, payload: dict) -> None:
        body = canonical_json(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self._cors_headers()
        self.end_headers()
        self.wfile.write(body)

    def do_OPTIONS(self):
        self.send_response(204)
        self._cors_headers()
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self):
        if self.path == "/health":
            self._send_json(200, {"status": "ok", "model_version": self.server.model.model_version})
        elif self.path == "/model-info":
            self._send_json(200, model_info_payload(self.server.model))
        else:
            self._send_json(404, {"error": "not found"})

    def do_POST(self):
        if self.path != "/analyze":
            self._send_json(404, {"error": "not found"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            raw = self.rfile.read(length) if length > 0 else b""
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                self._send_json(400, {"error": f"malformed JSON: {exc.msg}"})
                return
            try:
                draft = parse_draft(record)
            except DraftValidationError as exc:
                payload = {"error": str(exc)}
                if exc.field is not None:
                    payload["field"] = exc.field
                self._send_json(400, payload)
                return
            rec = analyze(self.server.model, draft)
            self._send_json(200, recommendation_payload(rec))
        except Exception:
            incident = uuid.uuid4().hex[:12]
            self._send_json(500, {"error": "internal error", "id": incident})


def make_server(
    model: TrainedModel,
    bind: str = "127.0.0.1",
    port: int = DEFAULT_PORT,
    origins=DEFAULT_ORIGINS,
) -> ImrecServer:
    return ImrecServer((bind, port), model, origins=origins)


def serve(model: TrainedModel, bind: str = "127.0.0.1", port: int = DEFAULT_PORT, origins=DEFAULT_ORIGINS) -> None:
    """Run the inference service until interrupted."""
    server = make_server(model, bind=bind, port=port, origins=origins)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
