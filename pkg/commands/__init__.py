from commands import ablation, evaluate, gradcheck, infer, params, simulate, synth, train

COMMANDS = (synth, train, evaluate, infer, simulate, gradcheck, ablation, params)
