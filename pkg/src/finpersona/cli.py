"""Command line entry point.

Every subcommand reads and writes artifacts by fixed names under one output
directory, so stages can be rerun independently:

    data/static.csv, data/temporal.csv, data/truth.csv, data/split.json
    segments.json, segments.csv
    hmm_model.json, intent_decoded.csv
    model_<setting>.json, history_<setting>.csv
    eval_<setting>.json  (plus eval_full_shuffled.json)
    chunks.jsonl, messages.jsonl, rag_metrics.json
    report_table2.csv, report.txt
"""

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import pandas as pd

from .evalharness import SETTINGS, evaluate, format_report, shuffle_test, write_table
from .evalharness.metrics import HeadReport, RunReport
from .exceptions import ConfigurationError, FinPersonaError, StageDependencyError
from .intent import align_and_score
from .personalizer import PersonalizerModel, TemporalPersonalizer, write_history
from .pipeline import decode_intents, make_batches, segment_customers
from .rag import (
    ChunkStore,
    ClientConfig,
    KnowledgeChunk,
    demo_corpus_dir,
    ingest_corpus,
    run_generation,
    write_outputs,
)
from .segmentation import segment_quality
from .synthgen import GeneratorConfig, generate, split_customers
from .synthgen.io import normalization_stats, read_dataset, read_split, read_truth, write_dataset

SUBCOMMANDS = (
    "gen-data", "segment", "intent", "train", "eval", "shuffle-test", "ablate",
    "rag-build", "rag-gen", "report", "all",
)

# --check thresholds
MIN_FULL_OVERALL = 0.85
MIN_HEAD = 0.80
MIN_SHUFFLE_DROP = 0.15
MIN_NO_TEMPORAL_GAP = 0.10
# reference generation rates; offline mode must be perfect instead
HTTP_REFERENCE = {"response_rate": 1.0, "json_validity": 0.992, "citation_correctness": 0.965}


def _section(defaults, given, name):
    given = dict(given or {})
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        raise ConfigurationError(f"unknown {name} keys: {', '.join(unknown)}")
    return {**defaults, **given}


@dataclass
class PipelineConfig:
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    segmentation: dict = field(default_factory=dict)
    intent: dict = field(default_factory=dict)
    model: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    rag: dict = field(default_factory=dict)
    paths: dict = field(default_factory=dict)

    DEFAULTS = {
        "segmentation": {"n_components": 2, "eps": None, "eps_percentile": 90.0, "min_pts": 5},
        "intent": {"process_var_ratio": 50.0, "bandwidth": 1.0, "max_iter": 100, "tol": 1e-4, "seed": 0},
        "model": {"d_proj": 32, "d_hidden": 32, "d_attn": 32, "d_embed": 8, "d_trunk": 64, "dropout": 0.1},
        "train": {"lr": 1e-3, "weight_decay": 1e-4, "clip_norm": 1.0, "batch_size": 128,
                  "max_epochs": 200, "patience": 12, "seed": 0},
        "rag": {"corpus_dir": None, "mode": "offline", "base_url": "http://localhost:8000/v1",
                "model": "local-model", "temperature": 0.2, "timeout": 30.0, "max_retries": 2,
                "api_key_env": "FINPERSONA_API_KEY", "max_concurrency": 4, "k": 4, "n_requests": 400},
        "paths": {"out": "runs/default"},
    }

    def __post_init__(self):
        if isinstance(self.generator, dict):
            self.generator = GeneratorConfig.from_dict(self.generator)
        for name, defaults in self.DEFAULTS.items():
            setattr(self, name, _section(defaults, getattr(self, name), name))
        if self.rag["k"] < 1 or self.rag["n_requests"] < 1:
            raise ConfigurationError("rag.k and rag.n_requests must be >= 1")
        ClientConfig(**self._client_fields())

    def _client_fields(self):
        names = {f.name for f in fields(ClientConfig)}
        return {k: v for k, v in self.rag.items() if k in names}

    def client_config(self):
        return ClientConfig(**self._client_fields())

    def estimator_params(self):
        return {**self.model, **self.train}

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigurationError(f"unknown config sections: {', '.join(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path):
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except FileNotFoundError:
            raise ConfigurationError(f"config file not found: {path}") from None

    def to_dict(self):
        out = {"generator": self.generator.to_dict()}
        for name in self.DEFAULTS:
            out[name] = dict(getattr(self, name))
        return out


class Stages:
    """Pipeline stages bound to one configuration and output directory."""

    def __init__(self, config, out=None, log=print):
        self.config = config
        self.out = Path(out or config.paths["out"])
        self.log = log

    def path(self, name):
        return self.out / name

    def need(self, name):
        p = self.path(name)
        if not p.exists():
            raise StageDependencyError(f"missing upstream artifact: {p}")
        return p

    def _write_json(self, name, obj):
        self.out.mkdir(parents=True, exist_ok=True)
        self.path(name).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")

    # data ------------------------------------------------------------------
    def gen_data(self):
        cfg = self.config.generator
        static, months = generate(cfg)
        split = split_customers(static, seed=cfg.seed)
        split = {k: [int(i) for i in v] for k, v in split.items()}
        write_dataset(self.path("data"), static, months, split,
                      normalization_stats(static, months, split["train_ids"]))
        self._write_json("data/generator_config.json", cfg.to_dict())
        self.log(f"gen-data: {len(static)} customers x {cfg.k_months} months")

    def _dataset(self):
        self.need("data/static.csv")
        static, months = read_dataset(self.path("data"))
        return static, months, read_split(self.path("data"))

    # segmentation ----------------------------------------------------------
    def segment(self):
        static, months, split = self._dataset()
        est, frame = segment_customers(static, months, split["train_ids"], **self.config.segmentation)
        frame.to_csv(self.path("segments.csv"), index=False)
        self._write_json("segments.json", {
            "customer_ids": frame["customer_id"].tolist(),
            "labels": frame["cluster"].tolist(),
            "segment_ids": frame["segment_id"].tolist(),
            "eps": est.eps_,
            "min_pts": est.min_pts,
            "delta": est.pca_.shrinkage_,
            "explained_variance": est.pca_.explained_variance_.tolist(),
            "n_clusters": int(est.n_clusters_),
        })
        self.log(f"segment: {est.n_clusters_} clusters, eps={est.eps_:.4f}")

    # intent ----------------------------------------------------------------
    def intent(self):
        static, months, split = self._dataset()
        est, decoded = decode_intents(months, split["train_ids"], **self.config.intent)
        decoded.to_csv(self.path("intent_decoded.csv"), index=False)
        self._write_json("hmm_model.json", {
            "params": {k: (list(v) if isinstance(v, tuple) else v) for k, v in est.get_params().items()},
            "model": est.model_.to_dict(),
            "feature_mean": est.feature_mean_.tolist(),
            "feature_std": est.feature_std_.tolist(),
            "n_iter": int(est.n_iter_),
        })
        self.log(f"intent: EM stopped after {est.n_iter_} iterations")

    # personalizer ----------------------------------------------------------
    def batches(self):
        static, months, split = self._dataset()
        segments = pd.read_csv(self.need("segments.csv"))
        decoded = pd.read_csv(self.need("intent_decoded.csv"))
        return make_batches(static, months, segments, decoded, split, k_months=self.config.generator.k_months)

    def _check_setting(self, setting):
        if setting not in SETTINGS:
            raise ConfigurationError(f"unknown ablation {setting!r}; choose from {', '.join(SETTINGS)}")

    def train(self, setting="full", data=None):
        self._check_setting(setting)
        data = data or self.batches()
        (tr, ytr), (va, yva) = data["train"], data["val"]
        est = TemporalPersonalizer(**self.config.estimator_params(), **SETTINGS[setting])
        est.fit(tr, ytr, eval_set=(va, yva))
        est.model_.save(self.path(f"model_{setting}.json"))
        write_history(est.history_, self.path(f"history_{setting}.csv"))
        self.log(f"train[{setting}]: best epoch {est.best_epoch_}")
        return est

    def load_model(self, setting="full"):
        return TemporalPersonalizer.from_model(PersonalizerModel.load(self.need(f"model_{setting}.json")))

    def evaluate(self, setting="full", data=None):
        self._check_setting(setting)
        est = self.load_model(setting)
        data = data or self.batches()
        report = evaluate(est, *data["test"], setting=setting)
        self._write_json(f"eval_{setting}.json", _report_dict(report))
        self.log(f"eval[{setting}]: overall macro-F1 {report.overall:.4f}")
        return report

    def shuffle(self, data=None, seed=0):
        est = self.load_model("full")
        data = data or self.batches()
        report = shuffle_test(est, *data["test"], seed=seed)
        self._write_json("eval_full_shuffled.json", _report_dict(report))
        self.log(f"shuffle-test: overall macro-F1 {report.overall:.4f}")
        return report

    def ablate(self, settings=None):
        data = self.batches()
        reports = {}
        for name in settings or SETTINGS:
            self.train(name, data)
            reports[name] = self.evaluate(name, data)
            if name == "full":
                reports["full_shuffled"] = self.shuffle(data)
        return reports

    def reports(self):
        out = {}
        for name in list(SETTINGS) + ["full_shuffled"]:
            p = self.path(f"eval_{name}.json")
            if p.exists():
                out[name] = _report_from_dict(json.loads(p.read_text()))
        return out

    # rag -------------------------------------------------------------------
    def rag_build(self):
        corpus = self.config.rag["corpus_dir"] or demo_corpus_dir()
        chunks = ingest_corpus(corpus)
        self.out.mkdir(parents=True, exist_ok=True)
        with open(self.path("chunks.jsonl"), "w", encoding="utf-8") as fh:
            for c in chunks:
                fh.write(json.dumps(asdict(c), ensure_ascii=False) + "\n")
        self.log(f"rag-build: {len(chunks)} chunks")

    def rag_gen(self, mode=None):
        chunks = [KnowledgeChunk(**json.loads(line))
                  for line in self.need("chunks.jsonl").read_text(encoding="utf-8").splitlines() if line]
        est = self.load_model("full")
        batch, _ = self.batches()["test"]
        n = min(self.config.rag["n_requests"], len(batch))
        batch = batch.take(np.arange(n))
        records = est.predict_records(batch)
        requests = [
            {"customer_id": r.customer_id, "action": r.action,
             "segment": int(batch.segment[i]), "intent": int(batch.intent[i])}
            for i, r in enumerate(records)
        ]
        client = self.config.client_config()
        if mode is not None:
            client = ClientConfig(**{**asdict(client), "mode": mode})
        outcomes, metrics = run_generation(requests, ChunkStore(chunks), client, k=self.config.rag["k"])
        write_outputs(outcomes, metrics, self.out)
        self.log(f"rag-gen: {metrics.n_requests} requests, validity {metrics.json_validity:.3f}, "
                 f"citation correctness {metrics.citation_correctness:.3f}")
        return metrics, client.mode

    # report ----------------------------------------------------------------
    def report(self):
        reports = self.reports()
        if "full" not in reports:
            raise StageDependencyError(f"missing upstream artifact: {self.path('eval_full.json')}")
        write_table(reports, self.path("report_table2.csv"))
        extra = []
        truth = read_truth(self.path("data")) if self.path("data/truth.csv").exists() else None
        if truth is not None and self.path("segments.csv").exists():
            seg = pd.read_csv(self.path("segments.csv")).merge(
                truth.drop_duplicates("customer_id")[["customer_id", "true_segment"]], on="customer_id")
            q = segment_quality(seg["cluster"].to_numpy(), seg["true_segment"].to_numpy())
            extra += ["", f"segmentation: ARI {q['ari']:.4f}, clusters {q['n_clusters']}, "
                          f"noise fraction {q['noise_fraction']:.4f}"]
        if truth is not None and self.path("intent_decoded.csv").exists():
            r = align_and_score(pd.read_csv(self.path("intent_decoded.csv")), truth)
            extra.append(f"intent decoding: accuracy {r['accuracy']:.4f}, ARI {r['ari']:.4f}")
        if self.path("rag_metrics.json").exists():
            m = json.loads(self.path("rag_metrics.json").read_text())["metrics"]
            extra += ["", "generation: " + ", ".join(f"{k} {v:.4f}" if isinstance(v, float) else f"{k} {v}"
                                                     for k, v in m.items())]
        text = format_report(reports, extra)
        self.path("report.txt").write_text(text)
        self.log(text.rstrip())
        return reports

    def run_all(self, rag_mode=None):
        self.gen_data()
        self.segment()
        self.intent()
        reports = self.ablate()
        self.rag_build()
        metrics, mode = self.rag_gen(rag_mode)
        self.report()
        return reports, metrics, mode


def _report_dict(report):
    return {"setting": report.setting, "overall": report.overall,
            "heads": {h: asdict(r) for h, r in report.heads.items()}}


def _report_from_dict(d):
    return RunReport(d["setting"], {h: HeadReport(**r) for h, r in d["heads"].items()})


def check_reports(reports):
    """Failed acceptance thresholds for the prediction results."""
    failures = []
    full = reports.get("full")
    if full is not None:
        if full.overall < MIN_FULL_OVERALL:
            failures.append(f"full overall {full.overall:.4f} < {MIN_FULL_OVERALL}")
        for h, r in full.heads.items():
            if r.macro_f1 < MIN_HEAD:
                failures.append(f"full {h} {r.macro_f1:.4f} < {MIN_HEAD}")
        if "full_shuffled" in reports:
            drop = full.overall - reports["full_shuffled"].overall
            if drop < MIN_SHUFFLE_DROP:
                failures.append(f"shuffle drop {drop:.4f} < {MIN_SHUFFLE_DROP}")
        if "no_temporal" in reports:
            gap = full.overall - reports["no_temporal"].overall
            if gap < MIN_NO_TEMPORAL_GAP:
                failures.append(f"no-temporal gap {gap:.4f} < {MIN_NO_TEMPORAL_GAP}")
        for name in ("no_intent", "no_segment"):
            if name in reports and full.overall - reports[name].overall <= 0:
                failures.append(f"{name} does not trail the full model")
    return failures


def check_generation(metrics, mode):
    m = metrics.to_dict()
    if mode == "offline":
        need = {"response_rate": 1.0, "json_validity": 1.0, "citation_correctness": 1.0}
    else:
        need = HTTP_REFERENCE
    failures = [f"{k} {m[k]:.4f} < {v}" for k, v in need.items() if m[k] < v]
    if mode == "offline" and not 20 <= m["avg_message_length"] <= 80:
        failures.append(f"average length {m['avg_message_length']:.1f} outside [20, 80]")
    return failures


def build_parser():
    p = argparse.ArgumentParser(prog="finpersona", description="Synthetic personalization pipeline.")
    p.add_argument("command", choices=SUBCOMMANDS)
    p.add_argument("--config", help="pipeline configuration JSON")
    p.add_argument("--seed", type=int, help="generator seed override")
    p.add_argument("--n-customers", type=int, help="generator size override")
    p.add_argument("--out", help="output directory override")
    p.add_argument("--check", action="store_true", help="exit nonzero when acceptance thresholds fail")
    p.add_argument("--ablation", default=None, choices=list(SETTINGS),
                   help="setting for train/eval (default full); restricts ablate to one setting")
    p.add_argument("--rag-mode", choices=("http", "offline"), default=None)
    p.add_argument("--quiet", action="store_true")
    return p


def load_config(args):
    config = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    gen = config.generator.to_dict()
    if args.seed is not None:
        gen["seed"] = args.seed
    if args.n_customers is not None:
        gen["n_customers"] = args.n_customers
    config.generator = GeneratorConfig.from_dict(gen)
    return config


def run(argv=None):
    args = build_parser().parse_args(argv)
    config = load_config(args)
    log = (lambda *a, **k: None) if args.quiet else print
    st = Stages(config, args.out, log)
    failures = []
    cmd = args.command
    setting = args.ablation or "full"
    if cmd == "gen-data":
        st.gen_data()
    elif cmd == "segment":
        st.segment()
    elif cmd == "intent":
        st.intent()
    elif cmd == "train":
        st.train(setting)
    elif cmd == "eval":
        report = st.evaluate(setting)
        failures = check_reports({"full": report}) if setting == "full" else []
    elif cmd == "shuffle-test":
        st.shuffle()
    elif cmd == "ablate":
        st.ablate([args.ablation] if args.ablation else None)
        failures = check_reports(st.reports())
    elif cmd == "rag-build":
        st.rag_build()
    elif cmd == "rag-gen":
        failures = check_generation(*st.rag_gen(args.rag_mode))
    elif cmd == "report":
        st.report()
    elif cmd == "all":
        reports, metrics, mode = st.run_all(args.rag_mode)
        failures = check_reports(reports) + check_generation(metrics, mode)
    if args.check and failures:
        for f in failures:
            print(f"check failed: {f}", file=sys.stderr)
        return 1
    return 0


def main(argv=None):
    try:
        return run(argv)
    except FinPersonaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
