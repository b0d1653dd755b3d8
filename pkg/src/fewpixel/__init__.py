"""Few-pixel black-box adversarial attacks by generalized simulated annealing."""
from .core import (AttackConfig, AttackObjective, AttackOutcome, BudgetedModel, BudgetExhausted,
                   PixelPerturbation, SearchResult, adversarial_loss, apply_perturbation, decode,
                   encode, is_success, score_budgeted, search_bounds)
from .de import DeParams, crossover, evolve, init_population, mutate
from .gsa import GsaParams, acceptance_probability, anneal, temperature, visiting_step
from .harness import (CampaignConfig, CampaignReport, attack_image, compute_metrics,
                      run_ablation, run_campaign)
from .strmask import (StrAttackParams, binary_mask, group_prox, init_from_mask, mask_call_cost,
                      strattack, structured_mask)

__version__ = "0.1.0"
