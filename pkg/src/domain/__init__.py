"""Domain classifier, metrics, ratio harness and separability analysis"""

from src.domain.metrics import accuracy, balanced_accuracy, confusion_counts, f1_score
from src.domain.classifier import (
    ADULT, CHILD, DomainClassifier, DomainConfig, DomainPosterior, DomainTrainingResult,
    posterior_from_logits, train_domain_classifier,
)
from src.domain.ratio_harness import RatioConfig, ratio_harness, write_ratio_table
from src.domain.separability import band_separability, domain_silhouette, linear_separability
