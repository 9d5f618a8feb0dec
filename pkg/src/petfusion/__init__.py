"""petfusion: a desk-scale low-dose PET restoration laboratory.

Pipeline: procedural PET/MR phantoms -> parallel-beam acquisition with
Poisson counting -> OSEM reconstruction -> multi-modality feature fusion +
conditional diffusion restoration -> PSNR/SSIM/NMSE evaluation.
"""

__version__ = "0.1.0"
