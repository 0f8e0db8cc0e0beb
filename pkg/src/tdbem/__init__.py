"""Time-domain PMCHWT boundary element solver with quasi-Helmholtz
projector regularization and Calderon-style static preconditioning.

Subpackage layout:

``mesh``
    closed triangle meshes, generators, connectivity, barycentric refinement
``basis``
    RWG and Buffa-Christiansen bases, mixed Gram matrix
``projectors``
    quasi-Helmholtz projectors on RWG and BC coefficient spaces
``static_ops``
    static single-layer / hypersingular / double-layer operators, preconditioner
``temporal``
    piecewise-polynomial temporal shape functions
``retarded``
    retarded-potential interaction matrix families
``system_assembly``
    marching system blocks (regularized and classical) and right-hand sides
``mot_solver``
    marching-on-in-time driver and current recovery
``analysis``
    companion spectra, condition sweeps, far fields, Mie/Rayleigh reference
``cli``
    experiment runner
"""

__version__ = "0.1.0"
