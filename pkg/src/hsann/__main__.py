from hsann.cli_io import main

main()
