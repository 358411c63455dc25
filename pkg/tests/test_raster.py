import io

import numpy as np
import pytest
from PIL import Image

from patchmosaic import (
    ColorMap,
    ColorMapError,
    DecodeError,
    SamplePair,
    SizeError,
    UnsupportedFormatError,
    color_from_label,
    decode_image,
    encode_image,
    label_from_color,
    parse_colormap,
    potsdam_colormap,
)
from patchmosaic.raster import format_colormap


def pil_bytes(img: Image.Image, fmt: str = "PNG") -> bytes:
    buf = io.BytesIO()
    img.save(buf, format=fmt)
    return buf.getvalue()


class TestCodecs:
    def test_single_red_pixel(self):
        data = pil_bytes(Image.new("RGB", (1, 1), (255, 0, 0)))
        arr = decode_image(data)
        assert arr.shape == (1, 1, 3)
        assert tuple(arr[0, 0]) == (255, 0, 0)

    def test_roundtrip_identity(self, rng):
        for _ in range(100):
            w = int(rng.integers(1, 9))
            h = int(rng.integers(1, 9))
            img = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
            assert np.array_equal(decode_image(encode_image(img)), img)

    def test_encode_deterministic(self, rng):
        img = rng.integers(0, 256, size=(7, 5, 3), dtype=np.uint8)
        assert encode_image(img) == encode_image(img)

    def test_rgba_alpha_dropped(self):
        src = Image.new("RGBA", (2, 2), (10, 20, 30, 128))
        arr = decode_image(pil_bytes(src))
        assert arr.shape == (2, 2, 3)
        assert tuple(arr[1, 1]) == (10, 20, 30)

    def test_dimensions_preserved(self, rng):
        img = rng.integers(0, 256, size=(3, 11, 3), dtype=np.uint8)
        assert decode_image(encode_image(img)).shape == (3, 11, 3)

    def test_garbage_bytes_decode_error(self):
        with pytest.raises(DecodeError):
            decode_image(b"definitely not a png")

    def test_truncated_png_decode_error(self):
        data = pil_bytes(Image.new("RGB", (32, 32), (1, 2, 3)))
        with pytest.raises(DecodeError):
            decode_image(data[: len(data) // 2])

    def test_jpeg_rejected(self):
        data = pil_bytes(Image.new("RGB", (4, 4), (9, 9, 9)), fmt="JPEG")
        with pytest.raises(UnsupportedFormatError):
            decode_image(data)

    def test_sixteen_bit_rejected(self):
        img = Image.fromarray(np.full((4, 4), 1000, dtype=np.uint16))
        with pytest.raises(UnsupportedFormatError):
            decode_image(pil_bytes(img))

    def test_palette_rejected(self):
        img = Image.new("RGB", (4, 4), (5, 6, 7)).convert("P")
        with pytest.raises(UnsupportedFormatError):
            decode_image(pil_bytes(img))

    def test_grayscale_rejected(self):
        img = Image.new("L", (4, 4), 100)
        with pytest.raises(UnsupportedFormatError):
            decode_image(pil_bytes(img))

    def test_encode_rejects_bad_shape(self):
        with pytest.raises(ValueError):
            encode_image(np.zeros((4, 4), dtype=np.uint8))
        with pytest.raises(ValueError):
            encode_image(np.zeros((4, 4, 3), dtype=np.float32))


class TestSamplePair:
    def test_adopts_and_freezes(self, rng):
        image = rng.integers(0, 256, size=(4, 4, 3), dtype=np.uint8)
        label = rng.integers(0, 6, size=(4, 4), dtype=np.uint8)
        pair = SamplePair(image=image, label=label, num_classes=6)
        assert not pair.image.flags.writeable
        assert not pair.label.flags.writeable
        assert pair.size == (4, 4)

    def test_dimension_mismatch(self, rng):
        image = rng.integers(0, 256, size=(4, 5, 3), dtype=np.uint8)
        label = np.zeros((4, 4), dtype=np.uint8)
        with pytest.raises(SizeError):
            SamplePair(image=image, label=label, num_classes=6)

    def test_label_out_of_range(self):
        image = np.zeros((2, 2, 3), dtype=np.uint8)
        label = np.full((2, 2), 6, dtype=np.uint8)
        with pytest.raises(ValueError):
            SamplePair(image=image, label=label, num_classes=6)

    def test_bad_num_classes(self):
        image = np.zeros((2, 2, 3), dtype=np.uint8)
        label = np.zeros((2, 2), dtype=np.uint8)
        with pytest.raises(ValueError):
            SamplePair(image=image, label=label, num_classes=0)


class TestColorMap:
    def test_potsdam_classes(self):
        cmap = potsdam_colormap()
        assert cmap.num_classes == 6
        assert cmap.names[0] == "impervious_surfaces"
        assert cmap.names[-1] == "clutter"
        assert tuple(cmap.colors[1]) == (0, 0, 255)

    def test_parse_handles_comments_and_order(self):
        text = "# header\n1 b 0 0 1\n\n0 a 0 0 0\n"
        cmap = parse_colormap(text)
        assert cmap.names == ("a", "b")

    def test_parse_rejects_gap(self):
        with pytest.raises(ColorMapError):
            parse_colormap("0 a 0 0 0\n2 c 1 1 1\n")

    def test_parse_rejects_duplicate_index(self):
        with pytest.raises(ColorMapError):
            parse_colormap("0 a 0 0 0\n0 b 1 1 1\n")

    def test_parse_rejects_duplicate_color(self):
        with pytest.raises(ColorMapError):
            parse_colormap("0 a 5 5 5\n1 b 5 5 5\n")

    def test_parse_rejects_bad_channel(self):
        with pytest.raises(ColorMapError):
            parse_colormap("0 a 0 0 256\n")

    def test_parse_rejects_bad_shape(self):
        with pytest.raises(ColorMapError):
            parse_colormap("0 a 0 0\n")

    def test_parse_rejects_empty(self):
        with pytest.raises(ColorMapError):
            parse_colormap("# nothing here\n")

    def test_format_parse_roundtrip(self, potsdam):
        again = parse_colormap(format_colormap(potsdam))
        assert again.names == potsdam.names
        assert np.array_equal(again.colors, potsdam.colors)

    def test_distinct_colors_enforced_on_construction(self):
        with pytest.raises(ColorMapError):
            ColorMap(names=("a", "b"), colors=np.zeros((2, 3), dtype=np.uint8))


class TestColorTranslation:
    def test_single_pixel_mapping(self):
        cmap = parse_colormap("0 water 0 0 255\n1 land 255 255 255\n")
        img = np.full((1, 1, 3), 255, dtype=np.uint8)
        assert label_from_color(img, cmap)[0, 0] == 1

    def test_label_to_color_uniform(self, potsdam):
        lbl = np.zeros((3, 3), dtype=np.uint8)
        rgb = color_from_label(lbl, potsdam)
        assert (rgb == 255).all()

    def test_checker(self, potsdam):
        lbl = np.array([[0, 1], [1, 0]], dtype=np.uint8)
        rgb = color_from_label(lbl, potsdam)
        assert tuple(rgb[0, 0]) == (255, 255, 255)
        assert tuple(rgb[0, 1]) == (0, 0, 255)

    def test_roundtrip_both_ways(self, rng, potsdam):
        lbl = rng.integers(0, 6, size=(9, 7), dtype=np.uint8)
        rgb = color_from_label(lbl, potsdam)
        assert np.array_equal(label_from_color(rgb, potsdam), lbl)
        # and color -> label -> color
        assert np.array_equal(color_from_label(label_from_color(rgb, potsdam), potsdam), rgb)

    def test_unmapped_color_reports_rgb_and_location(self, potsdam):
        img = color_from_label(np.zeros((3, 4), dtype=np.uint8), potsdam).copy()
        img[2, 3] = (1, 2, 3)
        with pytest.raises(ColorMapError) as err:
            label_from_color(img, potsdam)
        message = str(err.value)
        assert "(1, 2, 3)" in message
        assert "x=3" in message and "y=2" in message

    def test_fallback_class(self, potsdam):
        img = color_from_label(np.zeros((2, 2), dtype=np.uint8), potsdam).copy()
        img[0, 0] = (1, 2, 3)
        lbl = label_from_color(img, potsdam, fallback_class=5)
        assert lbl[0, 0] == 5
        assert lbl[1, 1] == 0

    def test_fallback_out_of_range(self, potsdam):
        img = np.zeros((1, 1, 3), dtype=np.uint8)
        with pytest.raises(ValueError):
            label_from_color(img, potsdam, fallback_class=6)

    def test_out_of_range_label(self, potsdam):
        lbl = np.full((2, 2), 6, dtype=np.uint8)
        with pytest.raises(ValueError):
            color_from_label(lbl, potsdam)
