"""Score candidate answers against references with BLEU, ROUGE, and BERTScore.

Run: python3 demos/04_similarity_metrics.py
"""

from corpusbench import similarity_report
from corpusbench.mocks import HashEmbedder

PAIRS = [
    ("the sinoatrial node paces the heart",
     "the sinoatrial node paces the heart"),
    ("the heart is paced by the sinoatrial node",
     "the sinoatrial node paces the heart"),
    ("planetary orbits decay over geological time",
     "the sinoatrial node paces the heart"),
]


def main():
    embedder = HashEmbedder(dimension=32, seed=3, granularity="token")
    print(f"{'candidate':<44} {'bleu':>6} {'R1':>6} {'R2':>6} {'RL':>6} {'BERT':>6}")
    for candidate, reference in PAIRS:
        report = similarity_report(candidate, reference, embedder)
        print(f"{candidate[:42]:<44} {report.bleu:>6.3f} {report.rouge1.f1:>6.3f} "
              f"{report.rouge2.f1:>6.3f} {report.rougeL.f1:>6.3f} {report.bertscore.f1:>6.3f}")


if __name__ == "__main__":
    main()
