import os
import requestz

print(os.getcwd(), requestz)
