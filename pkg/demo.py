"""Walkthrough demo of fshapes features"""

from dotenv import load_dotenv

from fshapes.baselines import colored_current, colored_distance
from fshapes.config import KernelConfig, MPConfig, RegistrationConfig
from fshapes.discretization import discretize
from fshapes.kernels import fcurrent_distance
from fshapes.models import FunctionalShape
from fshapes.synth import fiber_bundle, stain_midpoint, stained_ellipse
from fshapes.workflow import linear_fit, run_compression, run_crenel_experiment, run_disconnection_experiment, run_registration

# Load environment
load_dotenv()


def demo_crenels():
    """Demo 1: W' versus L1 under small signal rotations"""
    rows = run_crenel_experiment([0.005, 0.01, 0.02, 0.04])
    slope, _, r2 = linear_fit(rows)
    print(f"\n📊 W' grows linearly with the rotation: slope {slope:.4f}, R^2 {r2:.4f}")
    return rows


def demo_colored_ambiguity():
    """Demo 2: what colored currents cannot see"""
    print("\n" + "="*70)
    print("DEMO 2: Signal / Length Ambiguity")
    print("="*70)

    def edge(start, end, value):
        return FunctionalShape(ambient_dim=2, manifold_dim=1, vertices=[start, end], cells=[[0, 1]], signal=[value, value])

    short, long = edge([0.0, 0.0], [1.0, 0.0], 3.0), edge([-1.0, 0.0], [2.0, 0.0], 1.0)
    kernels = KernelConfig.parse("gaussian:0.5", "gaussian:0.5")
    print("Edge of length 1 with signal 3 vs edge of length 3 with signal 1")
    print(f"  colored current distance:    {colored_distance(kernels, colored_current(short), colored_current(long)):.6f}")
    print(f"  functional current distance: {fcurrent_distance(kernels, discretize(short), discretize(long)):.6f}")


def demo_disconnection():
    """Demo 3: product-space currents depend on connectivity"""
    rows = run_disconnection_experiment([0.1, 0.01, 0.001], KernelConfig.parse("gaussian:0.5", "gaussian:0.5"))
    print("\n📊 The functional current distance closes with the gap; the product-space one stays near 1")
    return rows


def demo_compression():
    """Demo 4: matching pursuit on a fiber bundle"""
    bundle = fiber_bundle(fibers=60, samples=20)
    kernels = KernelConfig.parse("gaussian:0.1", "gaussian:0.2")
    result = run_compression(bundle, kernels, MPConfig(epsilon=0.05))
    print(f"\n📊 Kept {len(result.atoms)} of {bundle.n_cells} atoms")
    return result


def demo_registration():
    """Demo 5: sliding a stain along an ellipse"""
    source = stained_ellipse(vertices=48, stain_center=0.0)
    target = stained_ellipse(vertices=48, stain_center=0.8)
    config = RegistrationConfig(
        kernels=KernelConfig.parse("gaussian:0.5", "gaussian:0.2"),
        sigma_v=0.5,
        timesteps=5,
        weight=100.0,
        max_iters=100,
    )
    result = run_registration(source, target, config)
    print(f"\n📊 Stain midpoint: {stain_midpoint(source).round(3)} -> {stain_midpoint(result.deformed_source).round(3)}")
    print(f"   Target midpoint: {stain_midpoint(target).round(3)}")
    return result


def main():
    """Run the demos"""
    print("\n" + "="*70)
    print("fshapes - Functional Currents Demo")
    print("="*70)

    demos = [
        ("Crenellated circle", demo_crenels),
        ("Colored current ambiguity", demo_colored_ambiguity),
        ("Connectivity sensitivity", demo_disconnection),
        ("Fiber bundle compression", demo_compression),
        ("Stain registration", demo_registration),
    ]

    print("\nAvailable demos:")
    for i, (name, _) in enumerate(demos, 1):
        print(f"  {i}. {name}")
    print("  0. Run all demos")

    try:
        choice = input(f"\nSelect demo (0-{len(demos)}): ").strip()

        if choice == "0":
            for name, demo_func in demos:
                print(f"\n{'='*70}")
                print(f"Running: {name}")
                print(f"{'='*70}")
                demo_func()
        elif choice in [str(i) for i in range(1, len(demos) + 1)]:
            demos[int(choice) - 1][1]()
        else:
            print("Invalid choice")

    except KeyboardInterrupt:
        print("\n\n👋 Demo interrupted. Goodbye!")
    except Exception as e:
        print(f"\n❌ Error: {str(e)}")
        import traceback
        traceback.print_exc()


if __name__ == "__main__":
    main()
