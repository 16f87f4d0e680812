from symsq.cli import main

main()
