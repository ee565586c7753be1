import numpy as np
import pytest

from retarget.data import ObjectAnnotation
from retarget.errors import InferenceError
from retarget.imaging import Rect, mask_bbox, save_mask
from retarget.inference import (annotation_from_bbox, annotation_from_mask_file, proportional_spec,
                                retarget)
from retarget.masks import RetargetSpec
from retarget.synthetic import toy_image
from retarget.train import load_checkpoint, save_checkpoint


@pytest.fixture
def toy(rng):
    image, seg = toy_image(rng, 96, 128)
    return image, ObjectAnnotation(mask_bbox(seg), seg)


def test_identity_geometry(toy, small_ckpt):
    image, ann = toy
    out = retarget(image, RetargetSpec(128, 96, ann.bbox), small_ckpt, ann)
    assert out.shape == image.shape
    assert out.min() >= 0 and out.max() <= 1


@pytest.mark.parametrize("w,h", [(384, 256), (256, 384), (1, 1), (512, 7)])
def test_exact_output_size(toy, small_ckpt, w, h):
    image, ann = toy
    out = retarget(image, None, small_ckpt, ann, target_size=(w, h))
    assert out.shape == (3, h, w)


def test_object_rect_spec(toy, small_ckpt):
    image, ann = toy
    out, mask = retarget(image, RetargetSpec(384, 256, Rect(200, 30, 80, 60)), small_ckpt, ann, return_mask=True)
    assert out.shape == (3, 256, 384)
    assert mask.object_alpha[30:90, 200:280].any() and not mask.object_alpha[:, :200].any()


def test_target_beyond_canvas(toy, small_ckpt):
    image, ann = toy
    with pytest.raises(InferenceError):
        retarget(image, None, small_ckpt, ann, target_size=(600, 100))


def test_no_object(toy, small_ckpt):
    image, _ = toy
    with pytest.raises(InferenceError, match="--bbox"):
        retarget(image, None, small_ckpt, lambda im: None, target_size=(64, 64))
    empty = ObjectAnnotation(Rect(0, 0, 4, 4), np.zeros((96, 128), bool))
    with pytest.raises(InferenceError):
        retarget(image, None, small_ckpt, empty, target_size=(64, 64))


def test_deterministic(toy, small_ckpt):
    image, ann = toy
    spec = RetargetSpec(200, 150, Rect(20, 20, 60, 50))
    a = retarget(image, spec, small_ckpt, ann)
    b = retarget(image, spec, small_ckpt, ann)
    assert a.tobytes() == b.tobytes()


def test_generator_only_checkpoint(toy, small_ckpt, tmp_path):
    image, ann = toy
    state = load_checkpoint(small_ckpt)
    g_only = save_checkpoint(state, tmp_path / "g.ckpt", include_discriminator=False)
    spec = RetargetSpec(100, 80, Rect(10, 10, 30, 30))
    assert retarget(image, spec, g_only, ann).tobytes() == retarget(image, spec, small_ckpt, ann).tobytes()


def test_proportional_spec():
    seg = np.zeros((100, 200), bool)
    seg[10:30, 40:80] = True
    spec = proportional_spec(ObjectAnnotation(Rect(40, 10, 40, 20), seg), (100, 200), 100, 50)
    assert spec.object_rect == Rect(20, 5, 20, 10)


def test_manual_annotations(tmp_path, rng):
    image = rng.random((3, 20, 30)).astype(np.float32)
    ann = annotation_from_bbox(image, Rect(5, 4, 10, 6))
    assert ann.seg.sum() == 60 and ann.bbox == Rect(5, 4, 10, 6)
    seg = np.zeros((20, 30), bool)
    seg[2:5, 7:9] = True
    save_mask(seg, tmp_path / "m.png")
    ann = annotation_from_mask_file(image, tmp_path / "m.png")
    assert ann.bbox == Rect(7, 2, 2, 3)
    save_mask(np.zeros((20, 30), bool), tmp_path / "e.png")
    with pytest.raises(InferenceError):
        annotation_from_mask_file(image, tmp_path / "e.png")
    save_mask(np.ones((5, 5), bool), tmp_path / "s.png")
    with pytest.raises(InferenceError):
        annotation_from_mask_file(image, tmp_path / "s.png")


def test_oversized_input_is_prescaled(small_ckpt, rng):
    image, seg = toy_image(rng, 300, 700)
    out = retarget(image, None, small_ckpt, ObjectAnnotation(mask_bbox(seg), seg), target_size=(256, 128))
    assert out.shape == (3, 128, 256)
