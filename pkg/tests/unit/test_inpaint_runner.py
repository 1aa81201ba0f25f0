import unittest
from contextlib import redirect_stderr
from io import StringIO
from unittest.mock import patch

from inpaint_core import InpaintRunner


class TestInpaintRunner(unittest.TestCase):
    def setUp(self):
        """Set up test fixtures before each test method."""
        self.runner = InpaintRunner()

    def test_runner_initialization(self):
        """Test that InpaintRunner initializes with correct version."""
        self.assertEqual(self.runner.version, "0.1.0")

    def test_run_delegates_to_cli(self):
        """run() hands its arguments to the CLI entry point and returns its exit code."""
        with patch('inpaint_core.engine.main', return_value=0) as main:
            self.assertEqual(self.runner.run(['gradcheck', '--seed', '1']), 0)
        main.assert_called_once_with(['gradcheck', '--seed', '1'])

    def test_unknown_command_exits_with_2(self):
        with redirect_stderr(StringIO()):
            with self.assertRaises(SystemExit) as ctx:
                self.runner.run(['paint'])
        self.assertEqual(ctx.exception.code, 2)

    def test_version_consistency(self):
        """Test that version is consistent and properly formatted."""
        version_parts = self.runner.version.split('.')
        self.assertEqual(len(version_parts), 3)
        for part in version_parts:
            self.assertTrue(part.isdigit())


if __name__ == '__main__':
    unittest.main()
