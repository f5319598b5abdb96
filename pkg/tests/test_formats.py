import pytest

from roadbench.dataset import (
    BoundingBox,
    DamageClass,
    DataError,
    Dataset,
)
from roadbench.evaluator import Detection, PredictionSet
from roadbench.formats import (
    SubmissionFile,
    build_submission,
    merge_pseudo_labels,
    parse_predictions,
    predictions_to_text,
    read_predictions,
    write_predictions,
)

from conftest import ann, record


def det(image_id, cls, box, score):
    return Detection(image_id, DamageClass(cls), BoundingBox(*box), score)


@pytest.fixture
def sample_preds():
    return PredictionSet.from_detections(
        [
            det("Japan_000001", "D20", (10, 20, 110, 220), 0.9),
            det("Japan_000001", "D00", (5, 5, 50, 50), 0.35),
            det("Czech_000001", "D40", (1, 2, 30, 40), 0.728),
        ]
    )


class TestPredictionFile:
    def test_write_read_round_trip(self, tmp_path, sample_preds):
        path = tmp_path / "preds.txt"
        write_predictions(sample_preds, path)
        loaded = read_predictions(path)
        assert loaded.by_image == sample_preds.by_image

    def test_reserialization_byte_identical(self, tmp_path, sample_preds):
        path = tmp_path / "preds.txt"
        write_predictions(sample_preds, path)
        first = path.read_bytes()
        write_predictions(read_predictions(path), path)
        assert path.read_bytes() == first

    def test_empty_set(self, tmp_path):
        path = tmp_path / "empty.txt"
        write_predictions(PredictionSet.from_detections([]), path)
        assert len(read_predictions(path)) == 0

    def test_lines_sorted_by_image_then_score(self, sample_preds):
        body = [
            line
            for line in predictions_to_text(sample_preds).splitlines()
            if not line.startswith("#")
        ]
        assert body == [
            "Czech_000001 D40 0.728 1 2 30 40",
            "Japan_000001 D20 0.9 10 20 110 220",
            "Japan_000001 D00 0.35 5 5 50 50",
        ]

    def test_score_one_rejected_with_line_number(self):
        text = "Japan_000001 D20 1.0 1 2 3 4\n"
        with pytest.raises(DataError, match=r"line 1.*exclusive"):
            parse_predictions(text)

    def test_score_zero_rejected(self):
        with pytest.raises(DataError, match="exclusive"):
            parse_predictions("Japan_000001 D20 0.0 1 2 3 4\n")

    def test_malformed_line_cites_line_number(self):
        text = "# header\nJapan_000001 D20 0.5 1 2 3\n"
        with pytest.raises(DataError, match="line 2"):
            parse_predictions(text)

    def test_unknown_class_rejected(self):
        with pytest.raises(DataError, match="line 1"):
            parse_predictions("Japan_000001 D77 0.5 1 2 3 4\n")

    def test_degenerate_box_rejected(self):
        with pytest.raises(DataError, match="line 1"):
            parse_predictions("Japan_000001 D20 0.5 5 2 5 4\n")

    def test_comments_and_blanks_skipped(self):
        text = "# comment\n\nJapan_000001 D20 0.5 1 2 3 4\n"
        assert len(parse_predictions(text)) == 1


class TestSubmissionFile:
    def test_empty_image_emits_bare_line(self):
        preds = PredictionSet.from_detections([])
        submission = build_submission(preds, 0.5, image_ids=["Japan_000001"])
        body = [l for l in submission.to_text().splitlines() if not l.startswith("#")]
        assert body == ["Japan_000001,"]

    def test_single_detection_line_grammar(self):
        preds = PredictionSet.from_detections(
            [det("Czech_000001", "D20", (10, 20, 110, 220), 0.9)]
        )
        submission = build_submission(preds, 0.5)
        body = [l for l in submission.to_text().splitlines() if not l.startswith("#")]
        assert body == ["Czech_000001,3 10 20 110 220"]

    def test_cap_keeps_top_five_by_score(self):
        dets = [
            det("Japan_000001", "D00", (i * 40, 0, i * 40 + 30, 30), (i + 1) / 10)
            for i in range(7)
        ]
        submission = build_submission(PredictionSet.from_detections(dets), 0.01)
        entries = submission.entries["Japan_000001"]
        assert len(entries) == 5
        # highest scores survive: boxes of dets 6..2
        assert entries[0][1].xmin == 6 * 40

    def test_threshold_and_nms_applied(self):
        dets = [
            det("Japan_000001", "D20", (10, 10, 60, 60), 0.99),
            det("Japan_000001", "D20", (12, 12, 62, 62), 0.60),
            det("Japan_000001", "D00", (0, 0, 8, 8), 0.05),
        ]
        submission = build_submission(PredictionSet.from_detections(dets), 0.5)
        entries = submission.entries["Japan_000001"]
        assert len(entries) == 1
        assert entries[0][0] is DamageClass.D20

    def test_images_sorted_lexicographically(self):
        dets = [
            det("Japan_000002", "D00", (0, 0, 5, 5), 0.9),
            det("Czech_000001", "D00", (0, 0, 5, 5), 0.9),
        ]
        submission = build_submission(PredictionSet.from_detections(dets), 0.5)
        body = [l for l in submission.to_text().splitlines() if not l.startswith("#")]
        assert [l.split(",")[0] for l in body] == ["Czech_000001", "Japan_000002"]

    def test_parse_reserialize_byte_identical(self, tmp_path):
        dets = [
            det("Japan_000001", "D20", (10, 20, 110, 220), 0.9),
            det("Japan_000001", "D40", (300, 300, 340, 350), 0.8),
        ]
        submission = build_submission(
            PredictionSet.from_detections(dets), 0.5, image_ids=["Japan_000001", "Japan_000002"]
        )
        path = tmp_path / "submission.txt"
        submission.write(path)
        reparsed = SubmissionFile.read(path)
        assert reparsed.to_text() == path.read_text()

    def test_parse_rejects_bad_class_index(self):
        with pytest.raises(DataError, match="line 1"):
            SubmissionFile.parse("Japan_000001,9 1 2 3 4\n")

    def test_parse_rejects_ragged_fields(self):
        with pytest.raises(DataError, match="multiple of 5"):
            SubmissionFile.parse("Japan_000001,3 1 2 3\n")


class TestMergePseudoLabels:
    @pytest.fixture
    def gt(self):
        return Dataset(
            [
                record("Japan_000001", annotations=(ann("D20", 10, 10, 60, 60),)),
                record("Japan_000002"),
            ]
        )

    def test_empty_predictions_no_change(self, gt):
        merged = merge_pseudo_labels(gt, PredictionSet.from_detections([]), 0.9)
        assert merged == gt

    def test_confident_novel_detection_added_and_flagged(self, gt):
        preds = PredictionSet.from_detections(
            [det("Japan_000002", "D40", (5, 5, 40, 40), 0.95)]
        )
        merged = merge_pseudo_labels(gt, preds, 0.9)
        added = merged.get("Japan_000002").annotations
        assert len(added) == 1
        assert added[0].pseudo is True
        assert added[0].cls is DamageClass.D40

    def test_below_threshold_ignored(self, gt):
        preds = PredictionSet.from_detections(
            [det("Japan_000002", "D40", (5, 5, 40, 40), 0.5)]
        )
        merged = merge_pseudo_labels(gt, preds, 0.9)
        assert merged == gt

    def test_duplicate_of_existing_same_class_dropped(self, gt):
        # IoU with the existing D20 box is 0.8
        preds = PredictionSet.from_detections(
            [det("Japan_000001", "D20", (10, 20, 60, 60), 0.99)]
        )
        assert (
            BoundingBox(10, 20, 60, 60).intersection_area(BoundingBox(10, 10, 60, 60))
            / (50 * 50 + 50 * 40 - 50 * 40)
            == 0.8
        )
        merged = merge_pseudo_labels(gt, preds, 0.9)
        assert merged == gt

    def test_same_box_different_class_kept(self, gt):
        preds = PredictionSet.from_detections(
            [det("Japan_000001", "D40", (10, 10, 60, 60), 0.99)]
        )
        merged = merge_pseudo_labels(gt, preds, 0.9)
        assert len(merged.get("Japan_000001").annotations) == 2

    def test_idempotent(self, gt):
        preds = PredictionSet.from_detections(
            [
                det("Japan_000002", "D40", (5, 5, 40, 40), 0.95),
                det("Japan_000001", "D00", (70, 70, 90, 90), 0.92),
            ]
        )
        once = merge_pseudo_labels(gt, preds, 0.9)
        twice = merge_pseudo_labels(once, preds, 0.9)
        assert once == twice

    def test_strict_unknown_image_rejected(self, gt):
        preds = PredictionSet.from_detections(
            [det("Japan_999999", "D40", (5, 5, 40, 40), 0.95)]
        )
        with pytest.raises(DataError):
            merge_pseudo_labels(gt, preds, 0.9)
        merged = merge_pseudo_labels(gt, preds, 0.9, strict=False)
        assert merged == gt

    def test_out_of_image_detection_clamped(self, gt):
        preds = PredictionSet.from_detections(
            [det("Japan_000002", "D40", (580, 580, 620, 640), 0.95)]
        )
        merged = merge_pseudo_labels(gt, preds, 0.9)
        box = merged.get("Japan_000002").annotations[0].box
        assert box == BoundingBox(580, 580, 600, 600)
