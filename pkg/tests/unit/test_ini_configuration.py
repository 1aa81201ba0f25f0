"""Test INI Configuration implementation."""

import unittest
import tempfile
import shutil
from pathlib import Path

from inpaint_core import IniConfiguration
from inpaint_core.configuration import Configuration
from inpaint_core.ini_configuration import convert_value, format_value


class TestIniConfiguration(unittest.TestCase):
    """Test INI configuration functionality."""

    def setUp(self):
        """Set up test environment."""
        self.test_dir = tempfile.mkdtemp()
        self.ini_file = Path(self.test_dir) / "test.ini"

    def tearDown(self):
        """Clean up test environment."""
        shutil.rmtree(self.test_dir)

    def _write(self, content: str) -> Path:
        with open(self.ini_file, 'w', encoding='utf-8') as f:
            f.write(content)
        return self.ini_file

    def test_protocol_compliance(self):
        """IniConfiguration satisfies the Configuration protocol."""
        self.assertIsInstance(IniConfiguration(self._write("")), Configuration)

    def test_load_coerces_values(self):
        """Test loading a run configuration with typed values."""
        data = IniConfiguration().load(self._write("""
[run]
seed = 7
out_dir = runs/test

[lafc]
use_edge_head = false
lambda_w = 0.01

[data]
mask_kinds = square_static, object
"""))
        self.assertEqual(data['run']['seed'], 7)
        self.assertEqual(data['run']['out_dir'], 'runs/test')
        self.assertIs(data['lafc']['use_edge_head'], False)
        self.assertAlmostEqual(data['lafc']['lambda_w'], 0.01)
        self.assertEqual(data['data']['mask_kinds'], ('square_static', 'object'))

    def test_load_nonexistent_file(self):
        """Test loading a non-existent file raises FileNotFoundError."""
        with self.assertRaises(FileNotFoundError):
            IniConfiguration(Path(self.test_dir) / "nonexistent.ini")

    def test_get_with_dot_notation(self):
        """Test getting values with dot notation and defaults."""
        config = IniConfiguration(self._write("[fgt]\nchannels = 64\n"))
        self.assertEqual(config.get('fgt.channels'), 64)
        self.assertEqual(config.get('channels'), 64)
        self.assertEqual(config.get('fgt.heads', 4), 4)

    def test_set_returns_bool(self):
        """set() returns True and bare keys land in [run]."""
        config = IniConfiguration(self._write(""))
        self.assertIs(config.set('seed', 3), True)
        self.assertEqual(config.section('run'), {'seed': 3})

    def test_save_and_reload(self):
        """Saved sections load back with the same coerced values."""
        config = IniConfiguration(self._write(""))
        sections = {'schedule': {'lr': 0.0001, 'lafc_iterations': 20}, 'data': {'mask_kinds': ('object', 'square_drift')}}
        destination = Path(self.test_dir) / "out" / "saved.ini"
        self.assertTrue(config.save(sections, destination))
        self.assertEqual(IniConfiguration(destination).get_all(), sections)

    def test_validate_accepts_desk_values(self):
        """A consistent configuration validates."""
        config = IniConfiguration(self._write("""
[run]
seed = 0

[data]
height = 64
width = 112

[schedule]
lafc_iterations = 2000
lafc_milestone = 857
"""))
        result = config.validate()
        self.assertEqual(result['status'], 'valid')
        self.assertEqual(result['errors'], [])

    def test_validate_reports_every_problem(self):
        """Each invalid value produces its own error message."""
        config = IniConfiguration(self._write("""
[lafc]
local_radius = -1

[data]
height = 30
mask_kinds = square_static, blob

[schedule]
fgt_iterations = 100
fgt_milestone = 200

[loss]
hinge_mode = wgan
"""))
        result = config.validate()
        self.assertEqual(result['status'], 'invalid')
        self.assertEqual(len(result['errors']), 5)

    def test_missing_seed_warns(self):
        """A [run] section without a seed is valid but warned about."""
        result = IniConfiguration(self._write("[run]\nout_dir = x\n")).validate()
        self.assertEqual(result['status'], 'valid')
        self.assertTrue(any('seed' in w for w in result['warnings']))


class TestValueCoercion(unittest.TestCase):

    def test_convert_value(self):
        self.assertIs(convert_value('Yes'), True)
        self.assertEqual(convert_value('12'), 12)
        self.assertEqual(convert_value('1e-4'), 1e-4)
        self.assertEqual(convert_value('a, 2'), ('a', 2))
        self.assertEqual(convert_value('runs/desk'), 'runs/desk')

    def test_format_value_inverts_convert(self):
        for value in (True, 5, 0.5, ('x', 'y'), 'text'):
            with self.subTest(value=value):
                self.assertEqual(convert_value(format_value(value)), value)


if __name__ == '__main__':
    unittest.main()
