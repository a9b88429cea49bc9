"""
Install requirements with `pip install -r requirements/examples.txt`

Usage: python scripts/plot_scores.py report.json
"""

import sys

import matplotlib.pyplot as plt

from diffsbt.metrics import load_report


report = load_report(sys.argv[1])
df = report.to_dataframe()
agg = report.aggregates

# One histogram per score
fig, (bleu_ax, semsim_ax) = plt.subplots(1, 2, figsize=(10, 4))
bleu_ax.hist(df['bleu'], bins=20, range=(0, 100), color='tab:blue')
bleu_ax.axvline(agg['mean_bleu'], color='black', linestyle='--')
bleu_ax.set_xlabel('BLEU-4')
bleu_ax.set_ylabel('explanations')

semsim_ax.hist(df['semsim'], bins=20, range=(-1, 1), color='tab:orange')
semsim_ax.axvline(agg['mean_semsim'], color='black', linestyle='--')
semsim_ax.set_xlabel(f'Semantic similarity ({report.provider})')

# Draw title and save
fig.suptitle(f"{agg['count']:,} explanations, exact match {agg['exact_match_rate']:.2f}%")
plt.savefig('scores.png', dpi=300, bbox_inches='tight')
