"""Corpus generation, clip storage, manifest, and split tests."""

import json

import numpy as np
import pytest

from tvpr.data.clips import VideoClip, default_timestamps, load_clip, save_clip
from tvpr.data.manifest import (ManifestEntry, entries_for_split,
                                load_manifest, split_manifest, write_manifest)
from tvpr.data.synth import (MOTION_PROGRAMS, PALETTE, GeneratorConfig,
                             SyntheticScene, generate_corpus, generate_scene,
                             make_captions, parse_caption, render_scene)
from tvpr.errors import ConfigError, ManifestError


def make_entries(n, identity=None):
    return [ManifestEntry(clip_id=f"clip{i:04d}", frames_path=f"clips/clip{i:04d}",
                          captions=(f"cap a {i}", f"cap b {i}"),
                          identity_id=identity(i) if identity else f"id{i}")
            for i in range(n)]


class TestVideoClip:
    def test_validation(self):
        with pytest.raises(ManifestError, match="frames must be"):
            VideoClip(np.zeros((2, 4, 8, 8)), np.arange(2), "c")
        with pytest.raises(ManifestError, match="timestamps"):
            VideoClip(np.zeros((2, 3, 8, 8)), np.arange(3), "c")
        with pytest.raises(ManifestError, match="nondecreasing"):
            VideoClip(np.zeros((2, 3, 8, 8)), np.array([1.0, 0.0]), "c")

    def test_subsample_endpoints(self):
        clip = VideoClip(np.arange(8 * 3 * 2 * 2, dtype=np.float32)
                         .reshape(8, 3, 2, 2) / 100.0,
                         default_timestamps(8), "c")
        sub = clip.subsample(3)
        assert sub.num_frames == 3
        # indices round(linspace(0, 7, 3)) = [0, 4, 7]
        np.testing.assert_array_equal(sub.timestamps, [0.0, 4.0, 7.0])
        np.testing.assert_array_equal(sub.frames[0], clip.frames[0])
        np.testing.assert_array_equal(sub.frames[-1], clip.frames[7])

    def test_subsample_to_one_keeps_first_frame(self):
        clip = VideoClip(np.random.default_rng(0).random((8, 3, 2, 2)),
                         default_timestamps(8), "c")
        sub = clip.subsample(1)
        np.testing.assert_array_equal(sub.frames[0], clip.frames[0])

    def test_subsample_upsamples_by_repetition(self):
        clip = VideoClip(np.random.default_rng(1).random((2, 3, 2, 2)),
                         default_timestamps(2), "c")
        sub = clip.subsample(4)
        assert sub.num_frames == 4

    def test_save_load_round_trip(self, tmp_path):
        clip = VideoClip(np.random.default_rng(2).random((3, 3, 4, 4))
                         .astype(np.float32),
                         np.array([0.0, 0.5, 1.0]), "c0")
        save_clip(tmp_path / "c0", clip)
        back = load_clip(tmp_path / "c0")
        np.testing.assert_array_equal(back.frames, clip.frames)
        np.testing.assert_array_equal(back.timestamps, clip.timestamps)

    def test_load_missing_directory(self, tmp_path):
        with pytest.raises(ManifestError, match="does not exist"):
            load_clip(tmp_path / "nope")

    def test_png_frames_loadable(self, tmp_path):
        import matplotlib.image as mpimg
        d = tmp_path / "c1"
        d.mkdir()
        rng = np.random.default_rng(3)
        frames = rng.random((2, 4, 4, 3)).astype(np.float32)
        for i, frame in enumerate(frames):
            mpimg.imsave(d / f"frame_{i}.png", frame)
        clip = load_clip(d)
        assert clip.frames.shape == (2, 3, 4, 4)
        # 8-bit quantization allowed
        np.testing.assert_allclose(clip.frames,
                                   frames.transpose(0, 3, 1, 2), atol=1.0 / 255)


class TestSceneRendering:
    def scene(self, **kw):
        args = dict(torso_color="red", legs_color="blue",
                    motion_program="pause", occlusion=None,
                    frame_count=8, height=32, width=32)
        args.update(kw)
        return SyntheticScene(**args)

    def test_band_colors_present(self):
        rng = np.random.default_rng(0)
        frames = render_scene(self.scene(), rng)
        assert frames.shape == (8, 3, 32, 32)
        # center column, torso band: red dominates
        torso = frames[0, :, 10, 16]
        assert torso[0] > 0.7 and torso[1] < 0.25
        legs = frames[0, :, 20, 16]
        assert legs[2] > 0.7 and legs[0] < 0.3

    def test_values_clipped(self):
        frames = render_scene(self.scene(), np.random.default_rng(1))
        assert frames.min() >= 0.0 and frames.max() <= 1.0

    def test_occlusion_hides_legs(self):
        occluded = self.scene(occlusion=(2, 6))
        frames = render_scene(occluded, np.random.default_rng(2))
        legs = frames[3, :, 20, 16]
        np.testing.assert_allclose(legs, 0.5, atol=0.05)
        visible = frames[0, :, 20, 16]
        assert visible[2] > 0.7

    def test_walk_direction_moves_figure(self):
        left = render_scene(self.scene(motion_program="walk_left"),
                            np.random.default_rng(3))
        columns = left.mean(axis=1)[:, 8:24].mean(axis=1)  # (T, W) brightness
        first = columns[0].argmax()
        last = columns[-1].argmax()
        assert last < first  # drifts toward lower column indices

    def test_determinism_per_seed(self):
        a, _ = generate_scene(5, self.scene())
        b, _ = generate_scene(5, self.scene())
        np.testing.assert_array_equal(a.frames, b.frames)


class TestCaptions:
    def test_two_distinct_paraphrases(self):
        c1, c2 = make_captions(SyntheticScene("red", "blue", "turn", None,
                                              8, 32, 32))
        assert c1 != c2
        assert "red" in c1 and "blue" in c1
        assert "spot" in c1 and "spinning" in c2

    def test_parse_round_trip_all_programs(self):
        for motion in MOTION_PROGRAMS:
            for torso in PALETTE:
                scene = SyntheticScene(torso, "green", motion, None, 4, 16, 16)
                for caption in make_captions(scene):
                    assert parse_caption(caption) == (torso, "green", motion)

    def test_parse_rejects_unrelated_text(self):
        with pytest.raises(ConfigError):
            parse_caption("a person doing something")


class TestGenerateCorpus:
    def test_layout_and_manifest(self, tmp_path):
        entries = generate_corpus(GeneratorConfig(num_clips=6, seed=0),
                                  tmp_path / "corpus")
        assert len(entries) == 6
        assert (tmp_path / "corpus" / "manifest.jsonl").exists()
        loaded = load_manifest(tmp_path / "corpus" / "manifest.jsonl")
        assert [e.clip_id for e in loaded] == [f"clip{i:04d}" for i in range(6)]
        clip = load_clip(tmp_path / "corpus" / "clips" / "clip0000")
        assert clip.frames.shape == (8, 3, 32, 32)

    def test_captions_distinct_across_corpus(self, tmp_path):
        entries = generate_corpus(GeneratorConfig(num_clips=30, seed=1),
                                  tmp_path / "c")
        caps = [c for e in entries for c in e.captions]
        assert len(set(caps)) == len(caps)

    def test_captions_consistent_with_identity(self, tmp_path):
        entries = generate_corpus(GeneratorConfig(num_clips=12, seed=2),
                                  tmp_path / "c")
        for e in entries:
            torso, legs, motion = parse_caption(e.captions[0])
            assert e.identity_id.startswith(f"{torso}-{legs}-{motion}-")

    def test_regeneration_bitwise_identical(self, tmp_path):
        cfg = GeneratorConfig(num_clips=4, seed=3)
        generate_corpus(cfg, tmp_path / "a")
        generate_corpus(cfg, tmp_path / "b")
        for i in range(4):
            fa = np.load(tmp_path / "a" / "clips" / f"clip{i:04d}" / "frames.npy")
            fb = np.load(tmp_path / "b" / "clips" / f"clip{i:04d}" / "frames.npy")
            np.testing.assert_array_equal(fa, fb)
        assert (tmp_path / "a" / "manifest.jsonl").read_text() == \
            (tmp_path / "b" / "manifest.jsonl").read_text()

    def test_occlusion_modes(self, tmp_path):
        on = generate_corpus(GeneratorConfig(num_clips=5, seed=4,
                                             occlusion="on"), tmp_path / "on")
        assert all(e.identity_id.endswith("-occluded") for e in on)
        off = generate_corpus(GeneratorConfig(num_clips=5, seed=4,
                                              occlusion="off"), tmp_path / "off")
        assert all(e.identity_id.endswith("-clear") for e in off)

    def test_too_many_clips_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="distinct captions"):
            generate_corpus(GeneratorConfig(num_clips=11, num_color_pairs=2),
                            tmp_path / "c")

    def test_color_pair_budget_respected(self, tmp_path):
        entries = generate_corpus(
            GeneratorConfig(num_clips=15, num_color_pairs=3, seed=5),
            tmp_path / "c")
        pairs = {tuple(e.identity_id.split("-")[:2]) for e in entries}
        assert len(pairs) == 3

    def test_frame_spacing_recorded(self, tmp_path):
        generate_corpus(GeneratorConfig(num_clips=2, seed=6,
                                        frame_spacing=0.5), tmp_path / "c")
        clip = load_clip(tmp_path / "c" / "clips" / "clip0000")
        np.testing.assert_array_equal(clip.timestamps,
                                      np.arange(8) * 0.5)


class TestManifest:
    def test_round_trip(self, tmp_path):
        entries = make_entries(3)
        path = tmp_path / "m.jsonl"
        write_manifest(entries, path)
        back = load_manifest(path, check_frames=False)
        assert [e.clip_id for e in back] == [e.clip_id for e in entries]
        assert back[0].captions == entries[0].captions

    def test_caption_count_enforced(self):
        with pytest.raises(ManifestError, match="exactly 2"):
            ManifestEntry("c", "p", ("only one",), "id")

    def test_duplicate_clip_id_rejected(self, tmp_path):
        path = tmp_path / "m.jsonl"
        line = make_entries(1)[0].to_json()
        path.write_text(line + "\n" + line + "\n")
        with pytest.raises(ManifestError, match="duplicate"):
            load_manifest(path, check_frames=False)

    def test_bad_json_line_located(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text(make_entries(1)[0].to_json() + "\n{broken\n")
        with pytest.raises(ManifestError, match=r"m\.jsonl:2"):
            load_manifest(path, check_frames=False)

    def test_missing_field_located(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text(json.dumps({"clip_id": "c"}) + "\n")
        with pytest.raises(ManifestError, match="missing field"):
            load_manifest(path, check_frames=False)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ManifestError, match="does not exist"):
            load_manifest(tmp_path / "nope.jsonl")

    def test_resolution_mismatch_rejected(self, tmp_path):
        rng = np.random.default_rng(0)
        for i, hw in enumerate((8, 16)):
            save_clip(tmp_path / f"clips/clip{i:04d}",
                      VideoClip(rng.random((2, 3, hw, hw)).astype(np.float32),
                                default_timestamps(2), f"clip{i:04d}"))
        write_manifest(make_entries(2), tmp_path / "m.jsonl")
        with pytest.raises(ManifestError, match="resolution"):
            load_manifest(tmp_path / "m.jsonl")

    def test_missing_frames_dir_rejected(self, tmp_path):
        write_manifest(make_entries(1), tmp_path / "m.jsonl")
        with pytest.raises(ManifestError):
            load_manifest(tmp_path / "m.jsonl")


class TestSplit:
    def test_default_ratio_sizes(self):
        # 20 entries at 0.6 : 0.05 : 0.35 -> floor 12 / floor 1 / rest 7
        assign = split_manifest(make_entries(20), (0.6, 0.05, 0.35), seed=0)
        assert (len(assign.train), len(assign.val), len(assign.test)) == (12, 1, 7)

    def test_fixed_counts_override(self):
        assign = split_manifest(make_entries(1134), (0.6, 0.05, 0.35), seed=0,
                                fixed_counts=(680, 57, 397))
        assert (len(assign.train), len(assign.val), len(assign.test)) == \
            (680, 57, 397)

    def test_fixed_counts_must_partition(self):
        with pytest.raises(ConfigError, match="partition"):
            split_manifest(make_entries(10), (0.6, 0.05, 0.35), seed=0,
                           fixed_counts=(5, 5, 5))

    def test_disjoint_cover(self):
        entries = make_entries(20)
        assign = split_manifest(entries, (0.6, 0.05, 0.35), seed=1)
        all_ids = assign.train + assign.val + assign.test
        assert sorted(all_ids) == sorted(e.clip_id for e in entries)

    def test_seed_determinism(self):
        entries = make_entries(20)
        a = split_manifest(entries, (0.6, 0.05, 0.35), seed=2)
        b = split_manifest(entries, (0.6, 0.05, 0.35), seed=2)
        assert a.train == b.train and a.test == b.test

    def test_seed_changes_assignment(self):
        entries = make_entries(20)
        a = split_manifest(entries, (0.6, 0.05, 0.35), seed=2)
        b = split_manifest(entries, (0.6, 0.05, 0.35), seed=3)
        assert a.train != b.train

    def test_ratio_validation(self):
        with pytest.raises(ConfigError, match="sum"):
            split_manifest(make_entries(4), (0.5, 0.1, 0.1), seed=0)
        with pytest.raises(ConfigError, match="nonnegative"):
            split_manifest(make_entries(4), (1.2, -0.1, -0.1), seed=0)

    def test_identity_disjoint_groups_stay_together(self):
        # 10 identities x 3 clips each
        entries = make_entries(30, identity=lambda i: f"person{i % 10}")
        assign = split_manifest(entries, (0.6, 0.0, 0.4), seed=4,
                                identity_disjoint=True)
        ident = {e.clip_id: e.identity_id for e in entries}
        for a in ("train", "val", "test"):
            for b in ("train", "val", "test"):
                if a >= b:
                    continue
                ids_a = {ident[c] for c in assign.subset(a)}
                ids_b = {ident[c] for c in assign.subset(b)}
                assert not ids_a & ids_b, (a, b)

    def test_entries_for_split_preserves_manifest_order(self):
        entries = make_entries(10)
        assign = split_manifest(entries, (0.5, 0.0, 0.5), seed=5)
        subset = entries_for_split(entries, assign, "train")
        positions = [entries.index(e) for e in subset]
        assert positions == sorted(positions)

    def test_all_subset(self):
        entries = make_entries(6)
        assign = split_manifest(entries, (0.5, 0.0, 0.5), seed=6)
        assert sorted(assign.subset("all")) == sorted(e.clip_id for e in entries)
        with pytest.raises(ConfigError, match="unknown split"):
            assign.subset("dev")
