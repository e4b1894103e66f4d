"""
Chi-square selection, tf-idf vectors and the three classifiers
==============================================================
"""

from pcc_autocode.classifiers import Dataset, predict, train
from pcc_autocode.corpus import CodedLine, Code, Speaker, Utterance
from pcc_autocode.features import build_vocabulary, chi_square_table, select_features, vectorize_many
from pcc_autocode.preprocess import preprocess_line

texts = {
    Code.Curability: ["we hope to cure it", "a cure is not likely", "get rid of it completely"],
    Code.SurvTime: ["maybe until christmas", "a year or two", "months rather than years"],
    Code.FurQol: ["keep your energy up", "socialize with friends", "activities you enjoy"],
}
lines = [CodedLine(Utterance("demo", i, Speaker.DOCTOR, t), code)
         for i, (code, t) in enumerate((c, t) for c, ts in texts.items() for t in ts)]
instances = [preprocess_line(cl) for cl in lines]

# A=2 in-class lines with the term, B=0, C=1, D=6
print("chi2:", float(chi_square_table(2, 0, 1, 6)))

vocab = build_vocabulary(instances)
fs = select_features(instances, k_per_class=3, vocabulary=vocab, classes=list(texts))
for code in texts:
    print(code.value, fs.top_terms(code))

X = vectorize_many(instances, vocab, fs)
data = Dataset.from_labels(X, [cl.code for cl in lines])
for alg in ("NB", "RF", "SVM"):
    model = train(alg, data)
    print(alg, [predict(model, X[i]).value for i in range(X.shape[0])])
