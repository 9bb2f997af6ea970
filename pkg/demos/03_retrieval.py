"""Build an exact-cosine index over chunks, retrieve with and without
reranking, and answer a question with retrieval augmentation.

Run: python3 demos/03_retrieval.py
"""

from corpusbench import CorpusDocument, answer_with_rag, build_index, chunk_document, retrieve
from corpusbench.mocks import CallableChatClient, HashEmbedder
from corpusbench.rag import RerankSpec, RetrievalConfig, default_config_grid

TEXT = (
    "# Pacemakers\n\n"
    "The sinoatrial node is the natural pacemaker of the heart. "
    "Vagal tone slows the sinoatrial discharge rate at rest. "
    "The atrioventricular node delays conduction into the ventricles.\n\n"
    "# Pressure\n\n"
    "Baroreceptors sense arterial stretch in the carotid sinus. "
    "Renal sodium handling dominates long term pressure control. "
    "Standing triggers reflex vasoconstriction within seconds."
)


def main():
    doc = CorpusDocument(id="demo", path="inline", title="demo",
                         raw_text=TEXT, cleaned_text=TEXT)
    chunks = chunk_document(doc, size=16, overlap=4)
    embedder = HashEmbedder(dimension=48, seed=1)
    store = build_index(chunks, embedder)
    print(f"indexed {len(store)} chunks at dimension {store.dimension}")

    question = "What slows the sinoatrial node?"
    plain = retrieve(store, question, RetrievalConfig(name="plain", top_k=3, rerank=None),
                     embedder)
    print("\ntop-3 by cosine:")
    for c in plain.chunks:
        print(f"  {c.score:+.3f}  {c.chunk_id}  {c.text[:48]!r}")

    reranked = retrieve(store, question,
                        RetrievalConfig(name="rr", top_k=5, rerank=RerankSpec(keep=3)),
                        embedder)
    print("\ntop-5 reranked to 3 by lexical overlap:")
    for c in reranked.chunks:
        print(f"  {c.score:+.3f}  {c.chunk_id}  {c.text[:48]!r}")

    echo = CallableChatClient(lambda req: req.user.split("Question:")[0][-120:].strip())
    result = answer_with_rag(echo, store,
                             RetrievalConfig(name="demo", top_k=4, rerank=RerankSpec(keep=2)),
                             question, embedder)
    print(f"\nanswer (echoing its context): ...{result.text[-80:]}")

    print(f"\nthe standard configuration sweep holds {len(default_config_grid())} configs:")
    for cfg in default_config_grid()[:3]:
        print(f"  {cfg.name}")
    print("  ...")


if __name__ == "__main__":
    main()
