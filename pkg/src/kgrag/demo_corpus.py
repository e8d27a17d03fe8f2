"""Shipped synthetic mini-corpus: six companies, three fiscal years each.

The filings are fictional prose with planted facts. Each document embeds a
single TRIPLES_JSON directive line carrying its facts in machine-readable
form, and every reference answer embeds a SCORE_JSON directive line: that is
what lets the offline mock provider drive extraction and judging end to end
deterministically. Directive lines are stripped wherever text is rendered
into downstream prompts, so they never contaminate synthesis.
"""
from __future__ import annotations

import json
from pathlib import Path

from .corpus import Document, QARecord, save_jsonl

COMPANIES = ("Apple", "Microsoft", "Alphabet", "NVIDIA", "Amazon", "Tesla")
YEARS = (2021, 2022, 2023)

# (company, year) -> (prose sentences, planted triples)
_FILINGS: dict[tuple[str, int], tuple[list[str], list[tuple[str, str, str]]]] = {
    ("Apple", 2021): (
        [
            "Apple reported total revenue of $365.8 billion for fiscal 2021, led by strong iPhone upgrade demand.",
            "The services business expanded across subscriptions and the installed base reached new highs.",
            "The board raised the quarterly dividend and authorized additional share repurchases.",
            "Supply constraints in consumer electronics persisted through the holiday quarter.",
        ],
        [
            ("Apple", "TotalRevenue", "$365.8B"),
            ("Apple", "QuarterlyDividend", "Raised"),
        ],
    ),
    ("Apple", 2022): (
        [
            "Apple posted record total revenue of $394.3 billion in fiscal 2022.",
            "iPhone revenue grew despite foreign exchange headwinds, and services revenue increased to an all-time high.",
            "The company continued buybacks and paid a quarterly dividend throughout the year.",
            "Component shortages eased while logistics costs in consumer electronics stayed elevated.",
        ],
        [
            ("Apple", "TotalRevenue", "$394.3B"),
            ("Apple", "ServicesRevenue", "Increased"),
        ],
    ),
    ("Apple", 2023): (
        [
            "Apple recorded total revenue of $383.3 billion for fiscal 2023, a modest decrease from the prior year.",
            "Wearables and services softened the decline while iPhone demand stayed resilient.",
            "The dividend program continued alongside a larger repurchase authorization.",
        ],
        [
            ("Apple", "TotalRevenue", "$383.3B"),
            ("Apple", "RevenueChange", "3%Decrease"),
        ],
    ),
    ("Microsoft", 2021): (
        [
            "Microsoft completed its acquisition of ZeniMax Media in fiscal 2021 for $7.5 billion, adding its game studios to the Xbox content pipeline.",
            "Commercial cloud revenue increased sharply as Azure consumption accelerated.",
            "Windows and Surface performed steadily across the commercial segment.",
            "The company returned capital through dividends and repurchases.",
        ],
        [
            ("Microsoft", "Acquired", "ZenimaxMedia"),
            ("Microsoft", "CloudRevenue", "Increased"),
        ],
    ),
    ("Microsoft", 2022): (
        [
            "Microsoft grew Azure revenue more than 40 percent in fiscal 2022 on broad enterprise migration.",
            "The board increased the quarterly dividend for the year.",
            "Gaming content from the ZeniMax Media studios reached the subscription catalog.",
            "Operating expenses rose with data center expansion in cloud computing.",
        ],
        [
            ("Microsoft", "AzureRevenueGrowth", "40%Increase"),
            ("Microsoft", "QuarterlyDividend", "Increased"),
        ],
    ),
    ("Microsoft", 2023): (
        [
            "Microsoft reported that Windows OEM revenue decreased 25 percent in fiscal 2023 as the PC market contracted.",
            "Artificial intelligence investments expanded across the cloud platform and productivity suites.",
            "Azure growth moderated but remained the largest contributor to commercial cloud.",
        ],
        [
            ("Microsoft", "WindowsOEMRevenue", "25%Decrease"),
            ("Microsoft", "AIInvestments", "Expanded"),
        ],
    ),
    ("Alphabet", 2021): (
        [
            "Alphabet advertising revenue reached $209.5 billion in 2021 on search and video strength.",
            "The Other Bets segment, including autonomous driving, recorded an operating loss of $5.3 billion.",
            "Headcount grew across engineering and cloud computing sales.",
        ],
        [
            ("Alphabet", "AdvertisingRevenue", "$209.5B"),
            ("OtherBets", "OperatingLoss", "$5.3B"),
        ],
    ),
    ("Alphabet", 2022): (
        [
            "Alphabet research and development investments reached $45 billion in 2022, concentrated in artificial intelligence and infrastructure.",
            "Advertising revenue growth slowed against difficult comparisons.",
            "Headcount increased before a later restructuring announcement.",
        ],
        [
            ("Alphabet", "R&DInvestments", "$45B"),
            ("Alphabet", "Headcount", "Increased"),
        ],
    ),
    ("Alphabet", 2023): (
        [
            "Google Cloud reported operating income of $1.7 billion in 2023, its first profitable year.",
            "Google Cloud annual revenue reached $33.1 billion on workload growth in cloud computing.",
            "Alphabet consolidated advertising remained the majority of revenue.",
        ],
        [
            ("GoogleCloud", "OperatingIncome", "$1.7B"),
            ("GoogleCloud", "AnnualRevenue", "$33.1B"),
        ],
    ),
    ("NVIDIA", 2021): (
        [
            "NVIDIA gaming revenue increased in fiscal 2021 behind sustained GeForce demand.",
            "Data center products gained adoption across hyperscale customers in semiconductors.",
            "The company expanded its software platforms for accelerated computing.",
        ],
        [
            ("Nvidia", "GamingRevenue", "Increased"),
            ("Nvidia", "GeForceDemand", "Strong"),
        ],
    ),
    ("NVIDIA", 2022): (
        [
            "NVIDIA data center revenue reached $10.6 billion in fiscal 2022 as accelerated computing adoption widened.",
            "The proposed Arm acquisition was terminated during the year.",
            "GeForce supply normalized after a period of shortage in semiconductors.",
        ],
        [
            ("Nvidia", "DataCenterRevenue", "$10.6B"),
            ("Nvidia", "ArmAcquisition", "Terminated"),
        ],
    ),
    ("NVIDIA", 2023): (
        [
            "NVIDIA data center revenue increased sharply in fiscal 2023 as demand for artificial intelligence accelerators surged.",
            "Gaming revenue declined from pandemic-era peaks before stabilizing.",
            "Networking products attached to accelerator deployments grew quickly.",
        ],
        [
            ("Nvidia", "DataCenterRevenue", "Increased"),
            ("Nvidia", "AIAcceleratorDemand", "Surged"),
        ],
    ),
    ("Amazon", 2021): (
        [
            "AWS annual revenue reached $62.2 billion in 2021 with operating margin expansion in cloud computing.",
            "Amazon nearly doubled its fulfillment network footprint since the prior year in e-commerce.",
            "Advertising services scaled alongside the marketplace.",
        ],
        [
            ("AWS", "AnnualRevenue", "$62.2B"),
            ("Amazon", "FulfillmentNetwork", "Doubled"),
        ],
    ),
    ("Amazon", 2022): (
        [
            "AWS annual revenue grew to $80.1 billion in 2022 while consumer segments absorbed inflationary costs.",
            "Amazon reduced operating costs through fulfillment network consolidation.",
            "International e-commerce results reflected currency pressure.",
        ],
        [
            ("AWS", "AnnualRevenue", "$80.1B"),
            ("Amazon", "OperatingCosts", "Reduced"),
        ],
    ),
    ("Amazon", 2023): (
        [
            "Amazon advertising revenue increased strongly in 2023 across sponsored products.",
            "AWS operating margin improved as optimization cycles eased in cloud computing.",
            "Same-day delivery coverage expanded in e-commerce.",
        ],
        [
            ("Amazon", "AdvertisingRevenue", "Increased"),
            ("AWS", "OperatingMargin", "Improved"),
        ],
    ),
    ("Tesla", 2021): (
        [
            "Tesla vehicle deliveries increased sharply in 2021 as Model Y production expanded across factories.",
            "Automotive gross margin benefited from manufacturing scale in the automotive industry.",
            "Regulatory credit revenue remained a declining share of the total.",
        ],
        [
            ("Tesla", "VehicleDeliveries", "Increased"),
            ("Tesla", "ModelYProduction", "Expanded"),
        ],
    ),
    ("Tesla", 2022): (
        [
            "Tesla automotive revenue reached $71.5 billion in 2022.",
            "Gigafactory Berlin opened and began ramping Model Y output for the automotive industry.",
            "Energy storage deployments grew alongside the vehicle business.",
        ],
        [
            ("Tesla", "AutomotiveRevenue", "$71.5B"),
            ("Tesla", "GigafactoryBerlin", "Opened"),
        ],
    ),
    ("Tesla", 2023): (
        [
            "Tesla reached cumulative production of five million vehicles in 2023.",
            "Price reductions supported delivery growth at the cost of automotive margin.",
            "Energy storage deployments increased to record levels in renewable energy.",
        ],
        [
            ("Tesla", "CumulativeProduction", "5MillionVehicles"),
            ("Tesla", "EnergyStorage", "Increased"),
        ],
    ),
}

_QUESTIONS: tuple[tuple[str, str, str, float], ...] = (
    (
        "q001",
        "Did Microsoft acquire ZeniMax Media?",
        "Yes. Microsoft completed its acquisition of ZeniMax Media in fiscal 2021, "
        "bringing the ZeniMax game studios into its content pipeline.",
        0.85,
    ),
    (
        "q002",
        "How did Windows OEM revenue change for Microsoft in fiscal 2023?",
        "Windows OEM revenue decreased 25 percent in fiscal 2023 as the PC market contracted.",
        0.8,
    ),
    (
        "q003",
        "What operating income did Google Cloud report in fiscal 2023?",
        "Google Cloud reported operating income of $1.7 billion in 2023, its first profitable year.",
        0.85,
    ),
    (
        "q004",
        "How much did Alphabet invest in research and development during 2022?",
        "Alphabet's research and development investments reached $45 billion in 2022.",
        0.8,
    ),
    (
        "q005",
        "What was Apple's total revenue in fiscal 2022?",
        "Apple reported record total revenue of $394.3 billion in fiscal 2022.",
        0.75,
    ),
    (
        "q006",
        "What happened to NVIDIA's data center revenue in fiscal 2022?",
        "NVIDIA's data center revenue reached $10.6 billion in fiscal 2022 as accelerated "
        "computing adoption widened.",
        0.8,
    ),
    (
        "q007",
        "What did Amazon report about AWS revenue in 2021?",
        "AWS annual revenue reached $62.2 billion in 2021 with operating margin expansion.",
        0.75,
    ),
    (
        "q008",
        "What production milestone did Tesla reach in 2023?",
        "Tesla reached cumulative production of five million vehicles in 2023.",
        0.8,
    ),
)

GAZETTEER = {
    "organizations": [
        "apple",
        "microsoft",
        "alphabet",
        "nvidia",
        "amazon",
        "tesla",
        "zenimax media",
        "google cloud",
        "aws",
        "other bets",
    ],
    "products": [
        "iphone",
        "windows",
        "azure",
        "surface",
        "xbox",
        "geforce",
        "model y",
        "gigafactory berlin",
    ],
    "industries": [
        "consumer electronics",
        "cloud computing",
        "semiconductors",
        "e-commerce",
        "automotive industry",
        "advertising",
    ],
    "sectors": ["technology"],
    "domains": ["artificial intelligence", "renewable energy", "energy storage"],
    "partnerships": ["strategic partnership"],
    "dividends": ["dividend", "quarterly dividend", "share repurchases"],
}


def build_documents() -> list[Document]:
    docs = []
    for company in COMPANIES:
        for year in YEARS:
            prose, triples = _FILINGS[(company, year)]
            directive = "TRIPLES_JSON:" + json.dumps(
                [{"subject": s, "predicate": p, "object": o} for s, p, o in triples]
            )
            text = " ".join(prose) + "\n\n" + directive + "\n"
            docs.append(
                Document(
                    doc_id=f"{company.lower()}-{year}",
                    company=company,
                    fiscal_year=year,
                    title=f"{company} fiscal {year} annual report",
                    text=text,
                )
            )
    return docs


def build_questions() -> list[QARecord]:
    records = []
    for qid, question, reference, score in _QUESTIONS:
        directive = "SCORE_JSON:" + json.dumps(
            {"score": score, "rationale": "planted deterministic judge score"}
        )
        records.append(
            QARecord(
                question_id=qid,
                question=question,
                reference_answer=reference + "\n" + directive,
            )
        )
    return records


def write_demo_corpus(workdir: str | Path) -> dict[str, Path]:
    """Materialize documents.jsonl, questions.jsonl, and gazetteer.json."""
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    paths = {
        "documents": workdir / "documents.jsonl",
        "questions": workdir / "questions.jsonl",
        "gazetteer": workdir / "gazetteer.json",
    }
    save_jsonl(build_documents(), paths["documents"])
    save_jsonl(build_questions(), paths["questions"])
    paths["gazetteer"].write_text(
        json.dumps(GAZETTEER, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return paths
