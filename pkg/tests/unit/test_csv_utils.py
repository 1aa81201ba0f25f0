"""
Unit tests for CSV utilities.

Tests write_rows_csv(), read_rows_csv() and the resumable CurveWriter.
"""
import unittest
import os
import shutil
import tempfile
from unittest.mock import patch

from inpaint_core.csv_utils import SCHEMAS, CurveWriter, read_rows_csv, write_rows_csv


def _metrics_row(clip: str, psnr=30.5):
    return {'clip': clip, 'frames': 20, 'psnr_hole': psnr, 'psnr_whole': 35.0,
            'ssim': 0.91, 'epe_whole': 0.25, 'epe_hole': 1.5}


class TestWriteRowsCsv(unittest.TestCase):
    """Test write_rows_csv() function."""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def _path(self, name: str) -> str:
        return os.path.join(self.temp_dir, name)

    def test_write_metrics_rows(self):
        """Rows come back under the schema's header in order."""
        path = write_rows_csv([_metrics_row('clip_0000'), _metrics_row('clip_0001', 28.0)],
                              self._path('metrics.csv'), 'metrics')
        rows = read_rows_csv(path)
        self.assertEqual(list(rows[0].keys()), SCHEMAS['metrics'])
        self.assertEqual([r['clip'] for r in rows], ['clip_0000', 'clip_0001'])
        self.assertEqual(float(rows[1]['psnr_hole']), 28.0)

    def test_none_and_bool_formatting(self):
        """None becomes an empty cell and booleans are lower-case words."""
        path = write_rows_csv([{'check': 'conv2d', 'max_rel_error': None, 'passed': True}],
                              self._path('gradcheck.csv'), 'gradcheck')
        row = read_rows_csv(path)[0]
        self.assertEqual(row['max_rel_error'], '')
        self.assertEqual(row['passed'], 'true')

    def test_floats_round_trip_exactly(self):
        """Floats are written with repr so no digits are lost."""
        value = 0.1 + 0.2
        path = write_rows_csv([_metrics_row('c', value)], self._path('m.csv'), 'metrics')
        self.assertEqual(float(read_rows_csv(path)[0]['psnr_hole']), value)

    def test_unknown_schema(self):
        with self.assertRaises(ValueError):
            write_rows_csv([], self._path('x.csv'), 'results')

    def test_row_missing_column(self):
        row = _metrics_row('c')
        del row['ssim']
        with self.assertRaises(ValueError) as context:
            write_rows_csv([row], self._path('x.csv'), 'metrics')
        self.assertIn('ssim', str(context.exception))

    def test_row_with_extra_column(self):
        row = dict(_metrics_row('c'), vin='ABC')
        with self.assertRaises(ValueError):
            write_rows_csv([row], self._path('x.csv'), 'metrics')

    def test_empty_rows_write_header_only(self):
        path = write_rows_csv([], self._path('empty.csv'), 'spectrum_groups')
        with open(path, encoding='utf-8') as f:
            self.assertEqual(f.read(), 'clip,group,count,ratio,l1\n')

    def test_creates_parent_directories(self):
        path = write_rows_csv([], self._path(os.path.join('a', 'b', 'c.csv')), 'gradcheck')
        self.assertTrue(os.path.exists(path))

    def test_write_file_permission_error(self):
        """Test error handling for write permission errors."""
        with patch('builtins.open', side_effect=PermissionError('Access denied')):
            with self.assertRaises(IOError) as context:
                write_rows_csv([], self._path('denied.csv'), 'metrics')
            self.assertIn('Failed to write', str(context.exception))

    def test_read_missing_file(self):
        with self.assertRaises(FileNotFoundError):
            read_rows_csv(self._path('absent.csv'))


class TestCurveWriter(unittest.TestCase):
    """Test the append-only loss-curve writer."""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()
        self.path = os.path.join(self.temp_dir, 'curves', 'lafc_curves.csv')

    def tearDown(self):
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    @staticmethod
    def _row(iteration: int):
        return {'iteration': iteration, 'lr': 1e-4, 'L_c': 0.5, 'L_v': 0.25, 'L_s': 0.0,
                'L_w': 0.0, 'L_e': 0.0, 'L_F': 0.75}

    def test_fresh_writer_truncates(self):
        """A fresh writer starts from the header even when the file exists."""
        writer = CurveWriter(self.path, 'lafc_curves')
        writer.extend([self._row(1), self._row(2)])
        CurveWriter(self.path, 'lafc_curves')
        self.assertEqual(read_rows_csv(self.path), [])

    def test_resume_keeps_rows_up_to_iteration(self):
        """Rows written after the resumed checkpoint are dropped."""
        writer = CurveWriter(self.path, 'lafc_curves')
        writer.extend(self._row(i) for i in range(1, 6))
        resumed = CurveWriter(self.path, 'lafc_curves', resume_iteration=3)
        resumed.append(self._row(4))
        self.assertEqual([r['iteration'] for r in read_rows_csv(self.path)], ['1', '2', '3', '4'])

    def test_resume_and_uninterrupted_files_match(self):
        """A resumed run leaves the same bytes as an uninterrupted one."""
        straight = os.path.join(self.temp_dir, 'straight.csv')
        CurveWriter(straight, 'lafc_curves').extend(self._row(i) for i in range(1, 5))
        CurveWriter(self.path, 'lafc_curves').extend(self._row(i) for i in range(1, 4))
        CurveWriter(self.path, 'lafc_curves', resume_iteration=2).extend(self._row(i) for i in (3, 4))
        with open(straight, 'rb') as a, open(self.path, 'rb') as b:
            self.assertEqual(a.read(), b.read())

    def test_resume_with_foreign_header_starts_over(self):
        CurveWriter(self.path, 'fgt_curves')
        CurveWriter(self.path, 'lafc_curves', resume_iteration=10)
        with open(self.path, encoding='utf-8') as f:
            self.assertEqual(f.readline().strip().split(','), SCHEMAS['lafc_curves'])

    def test_unknown_schema(self):
        with self.assertRaises(ValueError):
            CurveWriter(self.path, 'curves')


if __name__ == '__main__':
    unittest.main()
