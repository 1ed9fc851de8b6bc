# src/cli/pattern.py
"""
End-to-end run plus the cross-domain pattern checks
"""

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional

from config.logger import AASVLogger
from src.cli.experiment import ExperimentConfig, derive_seed
from src.cli.stages import Pipeline
from src.domain.classifier import DomainConfig
from src.domain.ratio_harness import RatioConfig, ratio_harness, ratio_pools, write_ratio_table
from src.domain.separability import band_separability
from src.encoder.checkpoint import load_encoder
from src.encoder.embedding_store import EmbeddingStore, extract_embeddings
from src.errors import AASVError, PatternCheckError, StageError
from src.evaluation.report import ADULT_COLUMN, EvalReport

logger = AASVLogger.get_logger(__name__)


@dataclass
class PatternCheck:
    name: str
    passed: bool
    detail: str


@dataclass
class PatternSummary:
    checks: List[PatternCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, passed: bool, detail: str):
        self.checks.append(PatternCheck(name, bool(passed), detail))
        level = logger.info if passed else logger.warning
        level(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": [asdict(c) for c in self.checks]}


def _cell(report: EvalReport, system: str, test_set: str) -> Optional[float]:
    return report.eer_percent(system, test_set)


def check_report(report: EvalReport, tolerances: dict, summary: PatternSummary):
    """Verification-error pattern across the specialists, the fusion and its ablation"""
    asv_child, asv_adult = report.child_mean("A-SV"), _cell(report, "A-SV", ADULT_COLUMN)
    csv_child, csv_adult = report.child_mean("C-SV"), _cell(report, "C-SV", ADULT_COLUMN)
    aasv_child, aasv_adult = report.child_mean("AASV"), _cell(report, "AASV", ADULT_COLUMN)
    plain_child = report.child_mean("w/o DC")

    def _ok(*values) -> bool:
        return all(v is not None for v in values)

    gap = tolerances["asv_domain_gap"]
    summary.add("adult encoder domain gap",
                _ok(asv_child, asv_adult) and asv_child - asv_adult >= gap,
                f"A-SV child {asv_child} vs adult {asv_adult}, need gap >= {gap}")

    gap = tolerances["forgetting_gap"]
    summary.add("fine-tuned encoder forgets adults",
                _ok(csv_adult, asv_adult) and csv_adult - asv_adult >= gap,
                f"C-SV adult {csv_adult} vs A-SV adult {asv_adult}, need gap >= {gap}")

    tol = tolerances["aasv_tolerance"]
    if _ok(asv_child, csv_child, asv_adult, csv_adult, aasv_child, aasv_adult):
        best_child, best_adult = min(asv_child, csv_child), min(asv_adult, csv_adult)
        ok = aasv_child <= best_child + tol and aasv_adult <= best_adult + tol
        detail = (f"AASV child {aasv_child:.2f} (best {best_child:.2f}), "
                  f"adult {aasv_adult:.2f} (best {best_adult:.2f}), tolerance {tol}")
    else:
        ok, detail = False, "missing specialist or AASV cells"
    summary.add("fusion matches the best specialist per domain", ok, detail)

    gap = tolerances["without_dc_gap"]
    summary.add("domain weighting beats plain concatenation on children",
                _ok(plain_child, aasv_child) and plain_child - aasv_child >= gap,
                f"w/o DC child {plain_child} vs AASV child {aasv_child}, need gap >= {gap}")

    wse = [_cell(report, "WSE", t) for t in report.test_sets]
    summary.add("weight-space ensemble row", "WSE" in report.systems and any(v is not None for v in wse),
                f"WSE cells {wse}")


def check_ratio(pipeline: Pipeline, summary: PatternSummary, report_dir: Path):
    cfg = pipeline.cfg
    threshold = pipeline.corpus_cfg.dc_severity_threshold
    encoder_a, _, _ = load_encoder(pipeline.require("train") / "encoder.ckpt", pipeline.arch)
    manifest = pipeline.manifest()
    entries = [e for pool in ratio_pools(manifest, threshold) for e in pool]
    store = extract_embeddings(encoder_a, pipeline.loader(), entries, pipeline.threads)

    ratio_cfg = RatioConfig.from_dict(cfg["ratio"], seed=derive_seed(cfg.seed, 6))
    domain_cfg = DomainConfig.from_dict(cfg["domain"], seed=derive_seed(cfg.seed, 7))
    table = ratio_harness(ratio_cfg, store, manifest, domain_cfg, threshold)
    write_ratio_table(table, report_dir / "ratio.tsv")

    min_acc = cfg["pattern"]["ratio_child_min_acc"]
    first, last = table.iloc[0], table.iloc[-1]
    summary.add("adult accuracy grows with adult data",
                len(table) > 1 and last["adult_acc"] > first["adult_acc"],
                f"{first['ratio']} -> {first['adult_acc']:.3f}, {last['ratio']} -> {last['adult_acc']:.3f}")
    summary.add("child accuracy holds at every ratio", bool((table["child_acc"] >= min_acc).all()),
                f"min child acc {table['child_acc'].min():.3f}, need >= {min_acc}")


def check_domain_classifier(pipeline: Pipeline, summary: PatternSummary):
    dc_log = json.loads((pipeline.require("train-dc") / "dc_log.json").read_text(encoding="utf-8"))
    tol = pipeline.cfg["pattern"]
    summary.add("domain classifier quality",
                dc_log["balanced_accuracy"] >= tol["dc_min_balanced_acc"] and dc_log["f1"] >= tol["dc_min_f1"],
                f"balanced acc {dc_log['balanced_accuracy']:.3f}, F1 {dc_log['f1']:.3f}")


def check_separability(pipeline: Pipeline, summary: PatternSummary) -> dict:
    store = EmbeddingStore.load(pipeline.require("embed") / "adult.emb")
    entries = pipeline.manifest().select("test")
    seed = derive_seed(pipeline.cfg.seed, 8)
    young = band_separability(store, entries, "child-young", seed)
    old = band_separability(store, entries, "child-old", seed)
    floor = pipeline.cfg["pattern"]["min_silhouette"]
    summary.add("young children separate from adults", young["silhouette"] > floor,
                f"silhouette {young['silhouette']:.3f}, need > {floor}")
    summary.add("separation grows with severity", young["silhouette"] > old["silhouette"],
                f"young {young['silhouette']:.3f} vs old {old['silhouette']:.3f}")
    return {"child-young": young, "child-old": old}


def cmd_reproduce_pattern(cfg: ExperimentConfig, skip_train: bool = False) -> PatternSummary:
    """
    Run gen, train, finetune, train-dc, embed, fuse and eval, then check the pattern

    With skip_train the training stages must already exist and are only verified.

    Raises:
        PatternCheckError: at least one check failed (pattern_summary.json is still written)
        StageError: a stage failed
    """
    pipeline = Pipeline(cfg)
    report_dir = cfg.path("report_dir")
    stage = "gen"
    try:
        pipeline.gen()
        for stage, run in (("train", pipeline.train), ("finetune", pipeline.finetune),
                           ("train-dc", pipeline.train_dc)):
            if skip_train:
                pipeline.require(stage)
            else:
                run()
        stage = "eval"
        pipeline.embed()
        pipeline.fuse()
        report = pipeline.evaluate()

        stage = "reproduce-pattern"
        summary = PatternSummary()
        check_report(report, cfg["pattern"], summary)
        check_ratio(pipeline, summary, report_dir)
        check_domain_classifier(pipeline, summary)
        separability = check_separability(pipeline, summary)
    except StageError:
        raise
    except (AASVError, OSError) as exc:
        logger.error(f"Stage '{stage}' failed: {exc}")
        raise StageError(stage, exc) from exc

    payload = dict(summary.to_dict(), separability=separability)
    report_dir.mkdir(parents=True, exist_ok=True)
    (report_dir / "pattern_summary.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    failed = [c.name for c in summary.checks if not c.passed]
    if failed:
        raise PatternCheckError(f"{len(failed)} pattern check(s) failed: {', '.join(failed)}")
    logger.info(f"All {len(summary.checks)} pattern checks passed")
    return summary
