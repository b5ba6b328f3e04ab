"""
ADE-Net - Attack discriminator with expert ensembles
Main entry point with CLI interface
"""
import sys
import argparse
import logging
from pathlib import Path

from config import settings
from src.cli.runner import VERBS, Command, run
from src.errors import AdeNetError, UsageError

# Configure logging
logging.basicConfig(
    level=settings.LOG_LEVEL,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def print_banner():
    """Print welcome banner"""
    banner = f"""
╔═══════════════════════════════════════════════════════════════╗
║                                                               ║
║          ADE-Net {settings.TOOL_VERSION:<45}║
║          Attack discriminator + expert ensembles              ║
║                                                               ║
╚═══════════════════════════════════════════════════════════════╝
    """
    print(banner)


class AdeNetArgumentParser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad usage; ADE-Net reserves 2 for config errors"""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"\n❌ {UsageError(message)}", file=sys.stderr)
        sys.exit(UsageError.exit_code)


def _seed_list(raw: str):
    try:
        return [int(part) for part in raw.split(',') if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got '{raw}'")


def main():
    """Main entry point"""
    parser = AdeNetArgumentParser(
        description='ADE-Net - Attack discriminator with expert ensembles',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Synthetic benchmark, attacks, both models and the report
  python main.py synth --out runs/demo
  python main.py attack --out runs/demo --attacks 3
  python main.py train-baseline --out runs/demo
  python main.py train-adenet --out runs/demo --attacks 3
  python main.py evaluate --out runs/demo

  # Real cube (cube_path etc. in the experiment file)
  python main.py prepare --config experiments/indian_pines.env --out runs/ip

  # Loss-weight grid for every attack count
  python main.py grid --out runs/grid --seed 0,1,2
        """
    )

    parser.add_argument(
        'verb',
        type=str,
        choices=VERBS,
        help='Command to run'
    )

    parser.add_argument(
        '--config',
        type=Path,
        default=None,
        help='Experiment config file (key=value lines)'
    )

    parser.add_argument(
        '--out', '-o',
        type=Path,
        default=Path('runs/default'),
        help='Output directory (default: runs/default)'
    )

    parser.add_argument(
        '--input', '-i',
        type=Path,
        default=None,
        help='Directory holding the previous command\'s artifacts (default: --out)'
    )

    parser.add_argument(
        '--seed',
        type=_seed_list,
        default=None,
        help='Comma-separated trial seeds, e.g. 0,1,2'
    )

    parser.add_argument(
        '--attacks',
        type=int,
        choices=[2, 3, 4, 5],
        default=None,
        help='Attack mix size: 2 = FGSM+CW, 3 = +PGD, 4 = +I-FGSM, 5 = +vanilla'
    )

    parser.add_argument(
        '--cka-mode',
        type=str,
        choices=['canonical', 'as_printed'],
        default=None,
        help='CKA denominator: canonical (unsquared norms) or as_printed (squared norms)'
    )

    parser.add_argument(
        '--arch',
        type=str,
        choices=['unet1d', 'mlp'],
        default=None,
        help='Architecture of the discriminator, experts, baseline and victim'
    )

    parser.add_argument(
        '--quiet', '-q',
        action='store_true',
        help='Skip the banner'
    )

    args = parser.parse_args()

    if not args.quiet:
        print_banner()

    try:
        command = Command(
            verb=args.verb,
            output_dir=args.out,
            config_path=args.config,
            input_dir=args.input,
            seeds=args.seed,
            attacks=args.attacks,
            cka_mode=args.cka_mode,
            arch=args.arch,
        )
    except AdeNetError as e:
        print(f"\n❌ {e}")
        sys.exit(e.exit_code)

    print(f"\n🚀 Running {args.verb} -> {args.out}")
    sys.exit(run(command))


if __name__ == "__main__":
    main()
