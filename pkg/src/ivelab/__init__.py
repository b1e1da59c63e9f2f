"""Model-value inconsistency as an epistemic-uncertainty signal.

Submodules:

``mdp``            exact tabular MDPs and Bellman operators
``env``            windy gridworld, rollouts, experience buffers
``tabular_learn``  MLE models, expected-SARSA values, explicit ensembles
``ive``            implicit value ensembles and disagreement statistics
``policy_select``  seeking/averse policies, μ-IVE planning study
``funcapprox``     the 1-D latent-model experiment with its own autodiff
``expcli``         experiment pipelines and the ``ivelab`` command line
"""

__version__ = "0.1.0"
