"""
Configuration settings for ADE-Net
Load from environment variables with fallback defaults
"""
import os
from pathlib import Path
from dotenv import load_dotenv

# Load .env file if exists
env_path = Path(__file__).parent.parent / ".env"
load_dotenv(env_path)


def _int_list(raw: str):
    return [int(part) for part in raw.split(",") if part.strip()]


# Logging
LOG_LEVEL = os.getenv("ADENET_LOG_LEVEL", "INFO").upper()

# Training settings
EPOCHS = int(os.getenv("ADENET_EPOCHS", "100"))
OFFLINE_EPOCHS = int(os.getenv("ADENET_OFFLINE_EPOCHS", "25"))
BATCH_SIZE = int(os.getenv("ADENET_BATCH_SIZE", "256"))
LR_DISCRIMINATOR = float(os.getenv("ADENET_LR_DISCRIMINATOR", "0.001"))
LR_EXPERT = float(os.getenv("ADENET_LR_EXPERT", "0.001"))
SEEDS = _int_list(os.getenv("ADENET_SEEDS", "0,1,2"))
TRAIN_FRACTION = float(os.getenv("ADENET_TRAIN_FRACTION", "0.7"))
WORKERS = int(os.getenv("ADENET_WORKERS", "1"))

# Architecture
ARCH = os.getenv("ADENET_ARCH", "mlp")
MLP_HIDDEN = _int_list(os.getenv("ADENET_MLP_HIDDEN", "64"))
UNET_DEPTH = int(os.getenv("ADENET_UNET_DEPTH", "2"))
UNET_BASE_CHANNELS = int(os.getenv("ADENET_UNET_BASE_CHANNELS", "8"))

# Similarity term
CKA_MODE = os.getenv("ADENET_CKA_MODE", "canonical")
CKA_CENTER = os.getenv("ADENET_CKA_CENTER", "false").lower() == "true"
OV_CAP = int(os.getenv("ADENET_OV_CAP", "512"))

# Attacks (one L-infinity budget shared by every attack)
EPSILON = float(os.getenv("ADENET_EPSILON", "0.1"))
PGD_STEPS = int(os.getenv("ADENET_PGD_STEPS", "10"))
IFGSM_STEPS = int(os.getenv("ADENET_IFGSM_STEPS", "10"))
CW_CONSTANT = float(os.getenv("ADENET_CW_CONSTANT", "1.0"))
CW_CONFIDENCE = float(os.getenv("ADENET_CW_CONFIDENCE", "0.0"))
CW_ITERS = int(os.getenv("ADENET_CW_ITERS", "100"))
CW_LR = float(os.getenv("ADENET_CW_LR", "0.005"))
CW_BINARY_STEPS = int(os.getenv("ADENET_CW_BINARY_STEPS", "0"))
ATTACK_CHUNK_SIZE = int(os.getenv("ADENET_ATTACK_CHUNK_SIZE", "512"))

# Synthetic benchmark
SYNTH_CLASSES = int(os.getenv("ADENET_SYNTH_CLASSES", "4"))
SYNTH_BANDS = int(os.getenv("ADENET_SYNTH_BANDS", "30"))
SYNTH_N_PER_CLASS = int(os.getenv("ADENET_SYNTH_N_PER_CLASS", "500"))
SYNTH_SEPARATION = float(os.getenv("ADENET_SYNTH_SEPARATION", "1.2"))
SYNTH_NOISE_STD = float(os.getenv("ADENET_SYNTH_NOISE_STD", "0.25"))

# Real cubes are reduced to this many bands
PCA_COMPONENTS = int(os.getenv("ADENET_PCA_COMPONENTS", "30"))

# Tool identity written into every manifest
TOOL_NAME = "adenet"
TOOL_VERSION = "1.0.0"
