"""Test that all modules can be imported successfully"""

def test_import_models():
    """Test importing models module"""
    from fshapes import models
    assert hasattr(models, 'FunctionalShape')
    assert hasattr(models, 'DiracFCurrent')
    assert hasattr(models, 'FCurrent')
    assert hasattr(models, 'validate_shape')


def test_import_metric_modules():
    """Test importing discretization, kernels and transport"""
    from fshapes import discretization, kernels, transport
    assert hasattr(discretization, 'discretize_curve')
    assert hasattr(discretization, 'discretize_surface')
    assert hasattr(kernels, 'fcurrent_distance')
    assert hasattr(transport, 'DeformationPath')
    assert hasattr(transport, 'pushforward_atoms')


def test_import_algorithms():
    """Test importing pursuit, registration and baselines"""
    from fshapes import baselines, pursuit, registration
    assert hasattr(pursuit, 'mp_compress')
    assert hasattr(registration, 'register')
    assert hasattr(baselines, 'colored_current')
    assert hasattr(baselines, 'product_space_current')


def test_import_workflow():
    """Test importing workflow and cli modules"""
    from fshapes import cli, workflow
    assert hasattr(workflow, 'run_compression')
    assert hasattr(workflow, 'run_registration')
    assert hasattr(cli, 'main')


def test_version():
    """Test package version"""
    import fshapes
    assert hasattr(fshapes, '__version__')
    assert fshapes.__version__ == "0.1.0"
