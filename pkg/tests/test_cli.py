import numpy as np
import pandas as pd
import pytest

from superpca.cli import main
from superpca.io import read_hsif, read_labels


@pytest.fixture
def scene_files(tmp_path):
    cube, gt = tmp_path / 'scene.hsif', tmp_path / 'gt.txt'
    assert main(['synthetic', '--output', str(cube), '--gt-output', str(gt), '--rows', '16', '--cols', '16',
                 '--bands', '8', '--regions', '3', '--seed', '1']) == 0
    return cube, gt


def test_synthetic_writes_scene(scene_files):
    cube, gt = scene_files
    assert (read_hsif(cube).rows, read_hsif(cube).bands) == (16, 8)
    assert read_labels(gt).labels.shape == (16, 16)


def test_convert(tmp_path):
    np.save(tmp_path / 'cube.npy', np.ones((3, 4, 5)))
    np.save(tmp_path / 'gt.npy', np.arange(12).reshape(3, 4))
    assert main(['convert', '--input', str(tmp_path / 'cube.npy'), '--output', str(tmp_path / 'cube.hsif')]) == 0
    assert read_hsif(tmp_path / 'cube.hsif').data.shape == (5, 3, 4)
    assert main(['convert', '--input', str(tmp_path / 'gt.npy'), '--output', str(tmp_path / 'gt.txt')]) == 0
    assert read_labels(tmp_path / 'gt.txt').labels.tolist() == [[0, 1, 2, 3], [4, 5, 6, 7], [8, 9, 10, 11]]


def test_pipeline_command(scene_files, tmp_path, capsys):
    cube, gt = scene_files
    csv = tmp_path / 'table.csv'
    code = main(['pipeline', '--input', str(cube), '--gt', str(gt), '--sf', '6', '--scales', '1', '--dim', '3',
                 '--train', '5', '--repeats', '2', '--csv', str(csv)])
    assert code == 0
    out = capsys.readouterr().out
    assert 'protocol: T=5 per class, R=2 repeats' in out
    assert 'fused' in out
    assert pd.read_csv(csv)['scale'].tolist() == ['c=-1', 'c=+0', 'c=+1', 'fused']


def test_multiscale_command(scene_files, tmp_path, capsys):
    cube, _ = scene_files
    prefix = tmp_path / 'ms'
    assert main(['multiscale', '--input', str(cube), '--output-prefix', str(prefix), '--sf', '4', '--scales', '1',
                 '--dim', '2']) == 0
    assert 'schedule: [3, 4, 6]' in capsys.readouterr().out
    for name in ('ms_c-1_s3.hsif', 'ms_c+0_s4.hsif', 'ms_c+1_s6.hsif'):
        assert read_hsif(tmp_path / name).bands == 2


def test_segment_reduce_classify_evaluate_render(scene_files, tmp_path, capsys):
    cube, gt = scene_files
    regions, reduced = tmp_path / 'regions.txt', tmp_path / 'reduced.hsif'
    prediction, fused, image = tmp_path / 'pred.txt', tmp_path / 'fused.txt', tmp_path / 'map.ppm'
    assert main(['segment', '--input', str(cube), '--output', str(regions), '--superpixels', '5']) == 0
    assert '5 regions' in capsys.readouterr().out
    assert read_labels(regions).labels.min() == 1
    assert main(['reduce', '--input', str(cube), '--regions', str(regions), '--dim', '3',
                 '--output', str(reduced)]) == 0
    assert read_hsif(reduced).bands == 3
    assert main(['classify', '--features', str(reduced), '--gt', str(gt), '--train', '5',
                 '--output', str(prediction)]) == 0
    assert read_labels(prediction).labels.min() >= 1
    assert main(['fuse', '--inputs', str(prediction), str(prediction), '--output', str(fused)]) == 0
    assert read_labels(fused).labels.tolist() == read_labels(prediction).labels.tolist()
    capsys.readouterr()
    assert main(['evaluate', '--prediction', str(fused), '--gt', str(gt), '--train', '5']) == 0
    assert 'kappa' in capsys.readouterr().out
    assert main(['render', '--input', str(fused), '--output', str(image)]) == 0
    assert image.read_bytes().startswith(b'P6\n16 16\n255\n')


def test_exit_codes(scene_files, tmp_path, capsys):
    cube, _ = scene_files
    with pytest.raises(SystemExit) as error:
        main(['segment', '--input', str(cube), '--output', str(tmp_path / 'r.txt'), '--superpixels', '0'])
    assert error.value.code == 2
    assert main(['reduce', '--input', str(cube), '--method', 'square', '--output', str(tmp_path / 'r.hsif')]) == 2
    assert 'usage:' in capsys.readouterr().err
    assert main(['render', '--input', str(tmp_path / 'missing.txt'), '--output', str(tmp_path / 'm.ppm')]) == 1
    assert 'missing.txt' in capsys.readouterr().err


def test_synthetic_plot_layout(tmp_path):
    cube, gt = tmp_path / 'field.hsif', tmp_path / 'field.txt'
    assert main(['synthetic', '--layout', 'plots', '--plots', '4', '--plot-size', '3', '--output', str(cube),
                 '--gt-output', str(gt)]) == 0
    assert (read_hsif(cube).rows, read_hsif(cube).bands) == (12, 20)
    assert sorted(set(read_labels(gt).labels.ravel().tolist())) == [1, 2, 3, 4]


def test_ablation_command_scale_range(scene_files, mocker, capsys):
    cube, gt = scene_files
    ablation = mocker.patch('superpca.cli.run_ablation', return_value=pd.DataFrame({'oa_mean': [1.0]}))
    assert main(['ablation', '--input', str(cube), '--gt', str(gt), '--noise-levels', '0', '10',
                 '--scale-range', '0', '10000']) == 0
    assert ablation.call_args.kwargs['scale_range'] == (0.0, 10000.0)
    assert ablation.call_args.args[3] == [0.0, 10.0]

    ablation.reset_mock()
    assert main(['ablation', '--input', str(cube), '--gt', str(gt)]) == 0
    assert ablation.call_args.kwargs['scale_range'] is None
    assert main(['pipeline', '--input', str(cube), '--gt', str(gt), '--sf', '4', '--scales', '0', '--dim', '3',
                 '--train', '5', '--repeats', '1', '--scale-range', '5', '5']) == 2
    assert 'low < high' in capsys.readouterr().err
