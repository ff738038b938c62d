"""
Command-line interface package.

Modules:
    command_manager.py: Argument parsing, command dispatch and exit codes
    report_manager.py: Table and CSV rendering of evaluation reports

Classes:
    CommandManager: Runs one command and maps failures to exit codes
    ReportManager: Formats EvalReport objects

Usage Example:
    ```python
    from src.ui.command_manager import CommandManager

    exit_code = CommandManager().run(["gradcheck", "--strategy", "all"])
    ```
"""

from .command_manager import CommandManager, main
from .report_manager import ReportManager

__all__ = ['CommandManager', 'main', 'ReportManager']
