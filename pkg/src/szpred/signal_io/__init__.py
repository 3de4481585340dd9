"""EEG records, the binary container, labeling rules and synthetic data."""
from .container import decode_record, encode_record, read_record, write_record
from .labeling import (Eligibility, LabelingConfig, SegmentLabeling, eligibility_check,
                       label_segments, label_subject, label_timeline,
                       merge_leading_seizures)
from .manifest import (Segment, SegmentedRecord, Subject, discover_subjects,
                       label_presegmented, load_subject, write_manifest)
from .records import ChannelInfo, EegRecord, Interval, SeizureEvent
from .synthetic import (DatasetSpec, SubjectPlan, SyntheticSpec, generate_synthetic,
                        synthesize_dataset)

__all__ = [
    "ChannelInfo", "DatasetSpec", "EegRecord", "Eligibility", "Interval",
    "LabelingConfig", "Segment", "SegmentLabeling", "SegmentedRecord", "SeizureEvent",
    "Subject", "SubjectPlan", "SyntheticSpec", "decode_record", "discover_subjects",
    "eligibility_check", "encode_record", "generate_synthetic", "label_presegmented",
    "label_segments", "label_subject", "label_timeline", "load_subject",
    "merge_leading_seizures", "read_record", "synthesize_dataset", "write_manifest",
    "write_record",
]
