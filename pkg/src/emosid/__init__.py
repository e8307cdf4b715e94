"""Closed-set, text-independent speaker identification in emotional speech.

A cascaded GMM-DNN classifier: per-(speaker, emotion) diagonal Gaussian
mixtures score MFCC segments, and a small ReLU network maps the resulting
log-likelihood vectors to a speaker posterior.
"""

from .audio import AudioClip, FrameSet, load_wav, resample, pre_emphasize, \
    frame_and_window, mix_interference
from .features import FeatureMatrix, MelFilterbank, hz_to_mel, mel_to_hz, \
    power_spectrum, build_filterbank, mfcc
from .gmm import GmmTag, TagStore, em_fit, score_utterance, gmm_identify
from .dnn import DnnModel, TrainConfig, relu, forward, train
from .cascade import SegmentPlan, LikelihoodVector, segment, likelihood_vector, \
    classify, classify_dnn_only
from .evaluation import TrialRecord, sid_performance, students_t, \
    confusion_matrix, compare_two
from .corpus import Manifest, SynthSpec, load_manifest, generate_synthetic, \
    protocol_counts
from .pipeline import PipelineConfig, train_models, evaluate_models

__version__ = "0.1.0"
