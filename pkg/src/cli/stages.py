# src/cli/stages.py
"""
Pipeline stages behind the CLI subcommands
Each stage writes into <checkpoints>/<stage>-<hash12>/ where the hash covers
the config sections the stage depends on and the hashes of its upstream
stages. stage.json records SHA-256 checksums of the artifacts; a stage whose
directory verifies is reused, a checksum mismatch is an error.
"""

import hashlib
import json
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from config.logger import AASVLogger
from src.cli.experiment import ExperimentConfig, derive_seed, excluded_cells
from src.corpus.manifest import CorpusConfig, CorpusLoader, Manifest, generate_corpus
from src.corpus.trials import TrialList, build_trials
from src.domain.classifier import DOMAIN_LABELS, DomainClassifier, DomainConfig, stratified_split, train_domain_classifier
from src.encoder.checkpoint import load_encoder, save_encoder
from src.encoder.embedding_store import EmbeddingStore, augmented_embeddings, extract_embeddings
from src.encoder.merge import wse_merge
from src.encoder.tdnn import EncoderArchitecture
from src.encoder.trainer import SpeakerDataset, TrainConfig, evaluate_accuracy, finetune, train_encoder
from src.errors import AASVError, PrerequisiteError, StageError
from src.evaluation.eer import eer
from src.evaluation.report import ADULT_COLUMN, CHILD_COLUMNS, EvalReport, build_report
from src.evaluation.scoring import score_store
from src.features.augment import AugmentConfig
from src.features.filterbank import FilterbankConfig
from src.fusion.fusion import FusionMode, fuse_store, write_provenance

logger = AASVLogger.get_logger(__name__)

STAGE_FILE = "stage.json"

# system name -> embedding store file produced by the embed / fuse stages
SYSTEM_STORES = {
    "A-SV": ("embed", "adult.emb"),
    "C-SV": ("embed", "child.emb"),
    "AASV": ("fuse", "aasv.emb"),
    "w/o DC": ("fuse", "plain.emb"),
    "WSE": ("embed", "wse.emb"),
}
TEST_SETS = list(CHILD_COLUMNS) + [ADULT_COLUMN]


def file_sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _safe_name(name: str) -> str:
    return name.replace("/", "").replace(" ", "_")


class Pipeline:
    """Stage runner for one effective configuration"""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.corpus_cfg = CorpusConfig.from_dict(cfg["corpus"])
        self.fb = FilterbankConfig.from_dict(cfg["features"])
        self.aug = AugmentConfig.from_dict(cfg["augment"])
        self.arch = EncoderArchitecture.from_dict(cfg["encoder"])
        self.threads = cfg.threads
        self._hashes: Dict[str, str] = {}
        self._manifest: Optional[Manifest] = None
        self._loader: Optional[CorpusLoader] = None
        logger.info(f"Pipeline initialized (seed={cfg.seed}, threads={self.threads})")

    # ---------- hashing and stage bookkeeping ----------

    def stage_hash(self, stage: str) -> str:
        if stage not in self._hashes:
            c, seed = self.cfg, self.cfg.seed
            payloads = {
                "gen": lambda: {"corpus": c["corpus"], "seed": seed},
                "train": lambda: {"up": [self.stage_hash("gen")], "encoder": c["encoder"], "train": c["train"],
                                  "features": c["features"], "augment": c["augment"], "seed": seed},
                "finetune": lambda: {"up": [self.stage_hash("train")], "finetune": c["finetune"], "seed": seed},
                "train-dc": lambda: {"up": [self.stage_hash("train")], "domain": c["domain"], "seed": seed},
                "embed": lambda: {"up": [self.stage_hash("train"), self.stage_hash("finetune")],
                                  "wse_alpha": c["eval"]["wse_alpha"]},
                "fuse": lambda: {"up": [self.stage_hash("embed"), self.stage_hash("train-dc")]},
                "eval": lambda: {"up": [self.stage_hash("fuse")], "eval": c["eval"], "seed": seed},
            }
            self._hashes[stage] = c.hash_of(dict(payloads[stage](), stage=stage))
        return self._hashes[stage]

    def stage_dir(self, stage: str) -> Path:
        if stage == "gen":
            return self.cfg.path("corpus_dir")
        return self.cfg.path("checkpoints_dir") / f"{stage}-{self.stage_hash(stage)[:12]}"

    def _verified(self, stage: str) -> bool:
        """True if the stage output exists and verifies; raises on checksum mismatch"""
        record_path = self.stage_dir(stage) / STAGE_FILE
        if not record_path.exists():
            return False
        record = json.loads(record_path.read_text(encoding="utf-8"))
        if record.get("config_hash") != self.stage_hash(stage):
            return False
        for name, checksum in record["artifacts"].items():
            artifact = record_path.parent / name
            if not artifact.exists() or file_sha256(artifact) != checksum:
                raise PrerequisiteError(f"stage '{stage}': artifact {artifact} fails its checksum; "
                                        f"delete {record_path.parent} to rebuild")
        return True

    def _seal(self, stage: str, artifacts: List[str], extra: Optional[dict] = None):
        directory = self.stage_dir(stage)
        self.cfg.write_effective(directory)
        record = {
            "stage": stage,
            "config_hash": self.stage_hash(stage),
            "artifacts": {name: file_sha256(directory / name) for name in artifacts},
        }
        if extra:
            record.update(extra)
        (directory / STAGE_FILE).write_text(json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def require(self, stage: str) -> Path:
        if not self._verified(stage):
            raise PrerequisiteError(f"missing '{stage}' output at {self.stage_dir(stage)}; "
                                    f"run 'aasv {stage}' first")
        return self.stage_dir(stage)

    def _record(self, stage: str) -> dict:
        return json.loads((self.stage_dir(stage) / STAGE_FILE).read_text(encoding="utf-8"))

    # ---------- shared inputs ----------

    def manifest(self) -> Manifest:
        if self._manifest is None:
            corpus_dir = self.require("gen")
            manifest = Manifest.load(corpus_dir)
            if manifest.checksum() != self._record("gen").get("manifest_checksum"):
                raise PrerequisiteError(f"manifest in {corpus_dir} does not match its stage record")
            self._manifest = manifest
        return self._manifest

    def loader(self) -> CorpusLoader:
        if self._loader is None:
            self._loader = CorpusLoader(self.manifest(), self.cfg.path("corpus_dir"), self.fb)
        return self._loader

    def _train_cfg(self, section: str, key: int) -> TrainConfig:
        return TrainConfig.from_dict(self.cfg[section], seed=derive_seed(self.cfg.seed, key))

    def _dataset(self, split: str, domain: str) -> SpeakerDataset:
        return SpeakerDataset.from_manifest(self.manifest().select(split, domain), self.loader(), self.threads)

    # ---------- stages ----------

    def gen(self, virtual: Optional[bool] = None) -> Manifest:
        if virtual is not None and virtual != self.corpus_cfg.virtual:
            self.cfg["corpus"]["virtual"] = virtual
            self.corpus_cfg = CorpusConfig.from_dict(self.cfg["corpus"])
            self._hashes.clear()
        if self._verified("gen"):
            logger.warning(f"Reusing corpus in {self.stage_dir('gen')}")
            return self.manifest()
        manifest = generate_corpus(self.corpus_cfg, self.cfg.seed, self.stage_dir("gen"), self.threads)
        self._seal("gen", ["manifest.jsonl", "speakers.jsonl"], {"manifest_checksum": manifest.checksum()})
        self._manifest = manifest
        return manifest

    def train(self) -> Path:
        out = self.stage_dir("train")
        if self._verified("train"):
            logger.warning(f"Reusing adult encoder in {out}")
            return out
        cfg = self._train_cfg("train", 1)
        dataset = self._dataset("train", "adult")
        encoder, head, log = train_encoder(dataset, cfg, self.arch, self.aug, self.fb)
        out.mkdir(parents=True, exist_ok=True)
        save_encoder(out / "encoder.ckpt", encoder, head, cfg.seed, cfg.epochs)
        summary = dict(log.to_dict(), train_accuracy=evaluate_accuracy(encoder, head, dataset, self.fb))
        (out / "train_log.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
        self._seal("train", ["encoder.ckpt", "train_log.json"])
        return out

    def finetune(self) -> Path:
        out = self.stage_dir("finetune")
        if self._verified("finetune"):
            logger.warning(f"Reusing child encoder in {out}")
            return out
        encoder_a, _, _ = load_encoder(self.require("train") / "encoder.ckpt", self.arch)
        cfg = self._train_cfg("finetune", 2)
        dataset = self._dataset("train", "child")
        adult_speakers = set(self.manifest().speaker_ids("train", "adult"))
        encoder_c, head, log = finetune(encoder_a, dataset, cfg, self.arch, adult_speakers, self.aug, self.fb)
        out.mkdir(parents=True, exist_ok=True)
        save_encoder(out / "encoder.ckpt", encoder_c, head, cfg.seed, cfg.epochs)
        summary = dict(log.to_dict(), train_accuracy=evaluate_accuracy(encoder_c, head, dataset, self.fb))
        (out / "train_log.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
        self._seal("finetune", ["encoder.ckpt", "train_log.json"])
        return out

    def dc_entries(self):
        threshold = self.corpus_cfg.dc_severity_threshold
        return [e for e in self.manifest().select("dc-train")
                if e.domain == "adult" or e.severity >= threshold]

    def train_dc(self) -> Path:
        out = self.stage_dir("train-dc")
        if self._verified("train-dc"):
            logger.warning(f"Reusing domain classifier in {out}")
            return out
        encoder_a, _, _ = load_encoder(self.require("train") / "encoder.ckpt", self.arch)
        domain_cfg = DomainConfig.from_dict(self.cfg["domain"], seed=derive_seed(self.cfg.seed, 3))
        entries = self.dc_entries()
        store = extract_embeddings(encoder_a, self.loader(), entries, self.threads)
        labels = np.array([DOMAIN_LABELS[e.domain] for e in entries])

        # hold out by utterance before adding augmented copies of the training part
        rng = np.random.default_rng(domain_cfg.seed)
        train_idx, test_idx = stratified_split(labels, domain_cfg.test_fraction, rng)
        x_train, y_train = store.matrix[train_idx], labels[train_idx]
        if domain_cfg.augmented_copies:
            train_entries = [entries[i] for i in train_idx]
            extra = augmented_embeddings(encoder_a, self.loader(), train_entries, domain_cfg.augmented_copies,
                                         derive_seed(self.cfg.seed, 4), self.aug, self.threads)
            x_train = np.concatenate([x_train, np.stack([e.values for e in extra])])
            y_train = np.concatenate([y_train, np.repeat(y_train, domain_cfg.augmented_copies)])
        result = train_domain_classifier(x_train, y_train, domain_cfg, store.matrix[test_idx], labels[test_idx])

        out.mkdir(parents=True, exist_ok=True)
        result.classifier.save(out / "dc.ckpt", domain_cfg.epochs)
        (out / "dc_log.json").write_text(json.dumps(result.summary(), indent=2) + "\n", encoding="utf-8")
        self._seal("train-dc", ["dc.ckpt", "dc_log.json"])
        return out

    def embed(self) -> Path:
        out = self.stage_dir("embed")
        if self._verified("embed"):
            logger.warning(f"Reusing embeddings in {out}")
            return out
        encoder_a, _, _ = load_encoder(self.require("train") / "encoder.ckpt", self.arch)
        encoder_c, _, _ = load_encoder(self.require("finetune") / "encoder.ckpt", self.arch)
        encoder_w = wse_merge(encoder_a, encoder_c, float(self.cfg["eval"]["wse_alpha"]))
        entries = self.manifest().select("test")
        out.mkdir(parents=True, exist_ok=True)
        for name, encoder in (("adult.emb", encoder_a), ("child.emb", encoder_c), ("wse.emb", encoder_w)):
            extract_embeddings(encoder, self.loader(), entries, self.threads).save(out / name)
        self._seal("embed", ["adult.emb", "child.emb", "wse.emb"])
        return out

    def fuse(self) -> Path:
        out = self.stage_dir("fuse")
        if self._verified("fuse"):
            logger.warning(f"Reusing fused embeddings in {out}")
            return out
        embed_dir = self.require("embed")
        classifier = DomainClassifier.load(self.require("train-dc") / "dc.ckpt", self.arch.embedding_dim)
        adult = EmbeddingStore.load(embed_dir / "adult.emb")
        child = EmbeddingStore.load(embed_dir / "child.emb")
        out.mkdir(parents=True, exist_ok=True)
        fused, provenance = fuse_store(child, adult, FusionMode.AASV, classifier)
        fused.save(out / "aasv.emb")
        write_provenance(provenance, out / "aasv_provenance.jsonl")
        plain, _ = fuse_store(child, adult, FusionMode.PLAIN_CONCAT)
        plain.save(out / "plain.emb")
        self._seal("fuse", ["aasv.emb", "aasv_provenance.jsonl", "plain.emb"])
        return out

    def trials(self) -> Dict[str, TrialList]:
        """One seeded trial list per test column"""
        manifest = self.manifest()
        n_pos, n_neg = int(self.cfg["eval"]["n_pos"]), int(self.cfg["eval"]["n_neg"])
        out = {}
        for k, name in enumerate(TEST_SETS):
            rng = np.random.default_rng(derive_seed(self.cfg.seed, 5, k))
            if name == ADULT_COLUMN:
                out[name] = build_trials(manifest, "test", n_pos, n_neg, rng, domain="adult")
            else:
                out[name] = build_trials(manifest, "test", n_pos, n_neg, rng, domain="child", band=name)
        return out

    def evaluate(self) -> EvalReport:
        stores_dir = {"embed": self.require("embed"), "fuse": self.require("fuse")}
        report_dir = self.cfg.path("report_dir")
        systems = list(self.cfg["eval"]["systems"])
        excluded = set(excluded_cells(self.cfg))
        trial_lists = self.trials()

        results: Dict[Tuple[str, str], Optional[float]] = {}
        for system in systems:
            stage, filename = SYSTEM_STORES[system]
            store = EmbeddingStore.load(stores_dir[stage] / filename)
            for test_set, trials in trial_lists.items():
                if (system, test_set) in excluded:
                    results[(system, test_set)] = None
                    continue
                scores = score_store(trials, store)
                scores.save(report_dir / "scores" / f"{_safe_name(system)}_{test_set}.txt")
                results[(system, test_set)] = eer(scores)[0]
        for test_set, trials in trial_lists.items():
            trials.save(report_dir / "trials" / f"{test_set}.txt")

        metadata = {
            "seed": self.cfg.seed,
            "config_hash": self.stage_hash("eval"),
            "checkpoints": {s: self.stage_hash(s)[:12] for s in ("train", "finetune", "train-dc")},
        }
        report = build_report(results, systems, TEST_SETS, metadata)
        report.write(report_dir)
        self.cfg.write_effective(report_dir)
        logger.info(f"Report written to {report_dir}\n{report.to_text()}")
        return report


def _run(stage: str, fn, *args):
    try:
        return fn(*args)
    except StageError:
        raise
    except (AASVError, OSError) as exc:
        logger.error(f"Stage '{stage}' failed: {exc}")
        raise StageError(stage, exc) from exc


def cmd_gen(cfg: ExperimentConfig, virtual: Optional[bool] = None) -> Manifest:
    return _run("gen", Pipeline(cfg).gen, virtual)


def cmd_train(cfg: ExperimentConfig) -> Path:
    return _run("train", Pipeline(cfg).train)


def cmd_finetune(cfg: ExperimentConfig) -> Path:
    return _run("finetune", Pipeline(cfg).finetune)


def cmd_train_dc(cfg: ExperimentConfig) -> Path:
    return _run("train-dc", Pipeline(cfg).train_dc)


def cmd_embed(cfg: ExperimentConfig) -> Path:
    return _run("embed", Pipeline(cfg).embed)


def cmd_fuse(cfg: ExperimentConfig) -> Path:
    return _run("fuse", Pipeline(cfg).fuse)


def cmd_eval(cfg: ExperimentConfig) -> EvalReport:
    pipeline = Pipeline(cfg)

    def _all():
        pipeline.embed()
        pipeline.fuse()
        return pipeline.evaluate()
    return _run("eval", _all)
