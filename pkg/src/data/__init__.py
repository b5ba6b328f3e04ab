# Data package

from src.data.cube import HsiCube, cube_pixels, cube_reader, load_cube, load_mat_cube, load_pixel_list, save_cube
from src.data.pca import PcaModel, fit_pca
from src.data.dataset import (
    BatchPlan,
    PixelDataset,
    load_dataset,
    prepare_cube,
    save_dataset,
    save_pca,
    split_and_batch,
    stratified_split,
)
from src.data.synthetic import make_synthetic

__all__ = [
    'HsiCube',
    'cube_pixels',
    'cube_reader',
    'load_cube',
    'load_mat_cube',
    'load_pixel_list',
    'save_cube',
    'PcaModel',
    'fit_pca',
    'BatchPlan',
    'PixelDataset',
    'load_dataset',
    'prepare_cube',
    'save_dataset',
    'save_pca',
    'split_and_batch',
    'stratified_split',
    'make_synthetic',
]
