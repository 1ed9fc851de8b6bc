"""Trial scoring, EER and reports"""

from src.evaluation.scoring import ScoreSet, cosine, mode_vectors, score_pairs, score_store, score_trials
from src.evaluation.eer import eer, eer_bruteforce
from src.evaluation.report import EvalReport, build_report, order_test_sets
