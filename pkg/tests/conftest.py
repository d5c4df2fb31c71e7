"""Shared fixtures: a small hand-built corpus with exact offsets, schematic
annotations, and preprocessed records, all deterministic and offline."""

from __future__ import annotations

import json
import random

import pytest

from synee.align import FeatureEncoder
from synee.annotate import ToyAnnotator
from synee.corpus import ArgumentRecord, EventRecord, EventSchema, RawSentence

FIXTURE_SCHEMA = {
    "组织关系-裁员": ["时间", "裁员方", "裁员人数"],
    "组织关系-解雇": ["时间", "解雇方", "被解雇人员"],
    "竞赛行为-夺冠": ["时间", "冠军", "夺冠赛事"],
    "产品行为-发布": ["时间", "发布产品", "发布方"],
    "人生-出行": ["时间", "出行人", "目的地"],
}


class SentenceBuilder:
    """Builds sentence text while recording exact span offsets by key."""

    def __init__(self, sentence_id: str):
        self.id = sentence_id
        self.text = ""
        self.spans: dict[str, tuple[int, str]] = {}
        self.events: list[EventRecord] = []

    def add(self, piece: str, key: str | None = None) -> "SentenceBuilder":
        if key is not None:
            self.spans[key] = (len(self.text), piece)
        self.text += piece
        return self

    def event(self, event_type: str, trigger_key: str, *args: tuple[str, str]) -> "SentenceBuilder":
        start, text = self.spans[trigger_key]
        arguments = tuple(
            ArgumentRecord(role=role, text=self.spans[key][1], start=self.spans[key][0])
            for role, key in args
        )
        self.events.append(
            EventRecord(event_type=event_type, trigger_text=text, trigger_start=start,
                        arguments=arguments)
        )
        return self

    def build(self) -> RawSentence:
        return RawSentence(id=self.id, text=self.text, events=tuple(self.events))


def build_fixture_sentences() -> list[RawSentence]:
    sentences = []

    b = SentenceBuilder("s01")
    b.add("前两天", "t").add("，").add("软件服务商Oracle公司", "org").add("宣布")
    b.add("裁员", "trig").add("900人", "n").add("。")
    b.event("组织关系-裁员", "trig", ("时间", "t"), ("裁员方", "org"), ("裁员人数", "n"))
    sentences.append(b.build())

    b = SentenceBuilder("s02")
    b.add("昨天下午", "t").add("小米公司", "org").add("发布", "trig").add("了")
    b.add("新款手机", "prod").add("。")
    b.event("产品行为-发布", "trig", ("时间", "t"), ("发布方", "org"), ("发布产品", "prod"))
    sentences.append(b.build())

    sentences.append(SentenceBuilder("s03").add("今天的天气非常好。").build())

    b = SentenceBuilder("s04")
    b.add("中国队", "who").add("在").add("昨晚", "t").add("的").add("决赛", "comp")
    b.add("中").add("夺冠", "trig").add("。")
    b.event("竞赛行为-夺冠", "trig", ("冠军", "who"), ("时间", "t"), ("夺冠赛事", "comp"))
    sentences.append(b.build())

    # deliberately overlapping gold roles: the same span serves two role classes
    b = SentenceBuilder("s05")
    b.add("上周五", "t").add("，").add("华创集团", "org").add("裁员", "trig1").add("并")
    b.add("解雇", "trig2").add("了").add("两名高管", "who").add("。")
    b.event("组织关系-裁员", "trig1", ("时间", "t"), ("裁员方", "org"))
    b.event("组织关系-解雇", "trig2", ("时间", "t"), ("解雇方", "org"), ("被解雇人员", "who"))
    sentences.append(b.build())

    b = SentenceBuilder("s06")
    b.add("4月1日", "t").add("，").add("Tesla公司", "org").add("发布", "trig")
    b.add("Model3轿车", "prod").add("。")
    b.event("产品行为-发布", "trig", ("时间", "t"), ("发布方", "org"), ("发布产品", "prod"))
    sentences.append(b.build())

    sentences.append(SentenceBuilder("s07").add("会议将于下周举行。").build())
    sentences.append(SentenceBuilder("s08").add("这本书的内容很有意思。").build())

    b = SentenceBuilder("s09")
    b.add("9月3日", "t").add("王老师", "who").add("出发", "trig").add("前往")
    b.add("北京", "dest").add("参加会议。")
    b.event("人生-出行", "trig", ("时间", "t"), ("出行人", "who"), ("目的地", "dest"))
    sentences.append(b.build())

    b = SentenceBuilder("s10")
    b.add("小红", "who").add("下周一", "t").add("将").add("出行", "trig").add("去")
    b.add("上海", "dest").add("旅游。")
    b.event("人生-出行", "trig", ("出行人", "who"), ("时间", "t"), ("目的地", "dest"))
    sentences.append(b.build())

    b = SentenceBuilder("s11")
    b.add("IBM公司", "org").add("周四", "t").add("宣布").add("裁员", "trig")
    b.add("5000人", "n").add("，涉及多个部门。")
    b.event("组织关系-裁员", "trig", ("裁员方", "org"), ("时间", "t"), ("裁员人数", "n"))
    sentences.append(b.build())

    b = SentenceBuilder("s12")
    b.add("今年夏天", "t").add("，").add("Apple公司", "org").add("将").add("发布", "trig")
    b.add("新一代笔记本电脑", "prod").add("。")
    b.event("产品行为-发布", "trig", ("时间", "t"), ("发布方", "org"), ("发布产品", "prod"))
    sentences.append(b.build())

    b = SentenceBuilder("s13")
    b.add("法国队", "who").add("时隔二十年再次").add("夺冠", "trig").add("，球迷欢呼。")
    b.event("竞赛行为-夺冠", "trig", ("冠军", "who"))
    sentences.append(b.build())

    b = SentenceBuilder("s14")
    b.add("由于业绩下滑，").add("某大型银行", "org").add("解雇", "trig").add("了")
    b.add("三位经理", "who").add("。")
    b.event("组织关系-解雇", "trig", ("解雇方", "org"), ("被解雇人员", "who"))
    sentences.append(b.build())

    b = SentenceBuilder("s15")
    b.add("张先生", "who").add("于").add("五一假期", "t").add("出行", "trig")
    b.add("，目的地是").add("成都", "dest").add("。")
    b.event("人生-出行", "trig", ("出行人", "who"), ("时间", "t"), ("目的地", "dest"))
    sentences.append(b.build())

    b = SentenceBuilder("s16")
    b.add("昨晚", "t").add("，").add("启明公司", "org").add("发布", "trig1")
    b.add("新产品", "prod").add("并").add("裁员", "trig2").add("十人", "n").add("。")
    b.event("产品行为-发布", "trig1", ("时间", "t"), ("发布方", "org"), ("发布产品", "prod"))
    b.event("组织关系-裁员", "trig2", ("时间", "t"), ("裁员人数", "n"))
    sentences.append(b.build())

    sentences.append(SentenceBuilder("s17").add("GitHub是一个代码托管平台。").build())

    b = SentenceBuilder("s18")
    b.add("赛事组委会宣布，").add("广东队", "who").add("夺得", "trig")
    b.add("本届联赛", "comp").add("冠军。")
    b.event("竞赛行为-夺冠", "trig", ("冠军", "who"), ("夺冠赛事", "comp"))
    sentences.append(b.build())

    b = SentenceBuilder("s19")
    b.add("经过数月谈判，").add("Microsoft公司", "org").add("于").add("12月20日", "t")
    b.add("正式宣布").add("解雇", "trig").add("其子公司的").add("两百名员工", "who")
    b.add("，引发关注。")
    b.event("组织关系-解雇", "trig", ("解雇方", "org"), ("时间", "t"), ("被解雇人员", "who"))
    sentences.append(b.build())

    b = SentenceBuilder("s20")
    b.add("下个月", "t").add("李女士", "who").add("计划").add("出行", "trig").add("前往")
    b.add("昆明", "dest").add("度假。")
    b.event("人生-出行", "trig", ("时间", "t"), ("出行人", "who"), ("目的地", "dest"))
    sentences.append(b.build())

    return sentences


def sentences_to_jsonl(sentences) -> str:
    lines = []
    for sentence in sentences:
        record = {
            "text": sentence.text,
            "id": sentence.id,
            "event_list": [
                {
                    "event_type": e.event_type,
                    "trigger": e.trigger_text,
                    "trigger_start_index": e.trigger_start,
                    "arguments": [
                        {
                            "role": a.role,
                            "argument": a.text,
                            "argument_start_index": a.start,
                        }
                        for a in e.arguments
                    ],
                }
                for e in sentence.events
            ],
        }
        lines.append(json.dumps(record, ensure_ascii=False))
    return "\n".join(lines) + "\n"


def schema_to_jsonl(schema_dict) -> str:
    lines = [
        json.dumps({"event_type": t, "role_list": [{"role": r} for r in roles]}, ensure_ascii=False)
        for t, roles in schema_dict.items()
    ]
    return "\n".join(lines) + "\n"


def make_synthetic_sentences(count: int = 50, seed: int = 7) -> list[RawSentence]:
    """Random well-formed sentences with trigger/argument spans at word joints."""
    rng = random.Random(seed)
    cjk_pool = "事件发生变化结果通知报告宣布城市公司员工市场产品计划活动人员队伍比赛"
    latin_pool = ["Alpha", "Beta", "Data", "Xy", "K2", "Go"]
    event_types = list(FIXTURE_SCHEMA)
    sentences = []
    for index in range(count):
        builder = SentenceBuilder(f"syn{index:03d}")
        event_type = rng.choice(event_types)
        roles = FIXTURE_SCHEMA[event_type]

        def cjk_chunk() -> str:
            return "".join(rng.choice(cjk_pool) for _ in range(rng.randint(1, 4)))

        def span_chunk() -> str:
            # separators around spans are CJK, so Latin runs never merge
            # across a span boundary and every span stays token-aligned
            if rng.random() < 0.2:
                return rng.choice(latin_pool)
            return cjk_chunk()

        builder.add(cjk_chunk())
        keys = []
        for role_index, role in enumerate(rng.sample(roles, rng.randint(1, len(roles)))):
            key = f"a{role_index}"
            builder.add(span_chunk(), key)
            builder.add(cjk_chunk())
            keys.append((role, key))
        builder.add(span_chunk(), "trig")
        builder.add(cjk_chunk())
        builder.event(event_type, "trig", *keys)
        sentences.append(builder.build())
    return sentences


@pytest.fixture(scope="session")
def schema() -> EventSchema:
    return EventSchema(FIXTURE_SCHEMA)


@pytest.fixture(scope="session")
def fixture_sentences() -> list[RawSentence]:
    return build_fixture_sentences()


@pytest.fixture(scope="session")
def toy_annotator() -> ToyAnnotator:
    return ToyAnnotator()


@pytest.fixture(scope="session")
def annotated_pairs(fixture_sentences, toy_annotator):
    return [(s, toy_annotator.annotate(s.text)) for s in fixture_sentences]


@pytest.fixture(scope="session")
def feature_encoder(annotated_pairs, schema) -> FeatureEncoder:
    encoder = FeatureEncoder(encoder_name="tiny", max_tokens=128)
    encoder.fit(annotated_pairs, schema=schema)
    return encoder


@pytest.fixture(scope="session")
def encoded_records(feature_encoder, annotated_pairs):
    return feature_encoder.transform(annotated_pairs)


@pytest.fixture(scope="session")
def feature_space(feature_encoder):
    return feature_encoder.feature_space_


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory, fixture_sentences):
    """Corpus, dev, and schema files on disk in the external line formats."""
    root = tmp_path_factory.mktemp("corpus")
    (root / "train.json").write_text(sentences_to_jsonl(fixture_sentences), encoding="utf-8")
    dev = [
        RawSentence(id=f"dev-{s.id}", text=s.text, events=s.events) for s in fixture_sentences[:6]
    ]
    (root / "dev.json").write_text(sentences_to_jsonl(dev), encoding="utf-8")
    (root / "schema.json").write_text(schema_to_jsonl(FIXTURE_SCHEMA), encoding="utf-8")
    return root
