"""
Coherent Deal - Main Entry Point
"""
import sys

from coherent_deal.cli import CommandLineApp


def main():
    """Main function"""
    sys.exit(CommandLineApp().run(sys.argv[1:]))


if __name__ == "__main__":
    main()
