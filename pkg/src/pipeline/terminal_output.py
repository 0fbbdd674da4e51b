"""
Terminal output utilities for consistent, structured progress reporting.
Provides standardized formatting for stage headers, progress bars, and summaries.
"""

from typing import Any


class TerminalOutput:
    """Utility class for consistent terminal output formatting."""

    enabled: bool = True

    @staticmethod
    def module_header(module: str, subject: str) -> None:
        """
        Print a stage header.

        Args:
            module: Stage name (e.g., 'TRAIN', 'EVAL')
            subject: What the stage is working on (run directory, checkpoint)
        """
        if TerminalOutput.enabled:
            print(f"\n[{module}] {subject}")

    @staticmethod
    def progress_bar(current: int, total: int, width: int = 30, prefix: str = "") -> str:
        """
        Generate a horizontal progress bar string.

        Args:
            current: Current progress value
            total: Total value
            width: Width of the progress bar in characters
            prefix: Optional prefix text

        Returns:
            Formatted progress bar string
        """
        if total == 0:
            percent = 100
        else:
            percent = int((current / total) * 100)

        filled = min(int((current / total) * width), width - 1) if total > 0 else width - 1
        bar = '=' * filled + '>' + ' ' * (width - filled - 1)

        return f"{prefix}[{bar}] {percent}% ({current}/{total})"

    @staticmethod
    def print_progress(current: int, total: int, width: int = 30, prefix: str = "") -> None:
        """
        Print a progress bar that overwrites the same line.
        """
        if not TerminalOutput.enabled:
            return
        bar = TerminalOutput.progress_bar(current, total, width, prefix)
        print(f"\r{bar}", end='', flush=True)

        # Print newline when complete
        if current >= total:
            print()

    @staticmethod
    def info(message: str, indent: int = 0) -> None:
        if TerminalOutput.enabled:
            print(f"{'  ' * indent}{message}")

    @staticmethod
    def summary(label: str, value: Any, indent: int = 0) -> None:
        """
        Print a summary line with label and value.

        Args:
            label: Summary label
            value: Summary value (floats are shown with 6 significant digits)
            indent: Number of spaces to indent
        """
        if not TerminalOutput.enabled:
            return
        shown = f"{value:.6g}" if isinstance(value, float) else value
        print(f"{'  ' * indent}{label}: {shown}")

    @staticmethod
    def separator() -> None:
        """Print a separator line."""
        if TerminalOutput.enabled:
            print("-" * 60)

    @staticmethod
    def complete(message: str = "Complete") -> None:
        if TerminalOutput.enabled:
            print(f"  {message}")


# Convenience functions for common stages
def train_header(subject: str) -> None:
    """Print a training stage header."""
    TerminalOutput.module_header("TRAIN", subject)


def eval_header(subject: str) -> None:
    """Print an evaluation stage header."""
    TerminalOutput.module_header("EVAL", subject)


def sweep_header(subject: str) -> None:
    """Print a sweep stage header."""
    TerminalOutput.module_header("SWEEP", subject)
